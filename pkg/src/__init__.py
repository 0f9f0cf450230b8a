"""geoshift: generalization error estimators for geostatistical learning under covariate shift."""
