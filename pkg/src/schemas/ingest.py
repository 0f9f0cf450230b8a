"""Tabular ingestion schemas."""
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ColumnSchema(BaseModel):
    """Roles of the columns of a well-log style CSV file."""
    model_config = ConfigDict(frozen=True)

    coord_columns: List[str] = Field(min_length=1)
    feature_columns: List[str] = Field(min_length=1)
    label_column: str
    domain_column: Optional[str] = None

    @model_validator(mode="after")
    def validate_disjoint(self) -> "ColumnSchema":
        """A column may play a single role."""
        names = list(self.coord_columns) + list(self.feature_columns) + [self.label_column]
        if self.domain_column is not None:
            names.append(self.domain_column)
        if len(names) != len(set(names)):
            raise ValueError("Column roles must be disjoint")
        return self

    @property
    def numeric_columns(self) -> List[str]:
        return list(self.coord_columns) + list(self.feature_columns)

    @property
    def required_columns(self) -> List[str]:
        names = self.numeric_columns + [self.label_column]
        if self.domain_column is not None:
            names.append(self.domain_column)
        return names
