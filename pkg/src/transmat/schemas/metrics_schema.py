# transmat/schemas/metrics_schema.py
"""
Metrics Schema
--------------
Display fields and headers for per-sample metric reports.
"""

from typing import Dict, List


class MetricsSchema:
    def __init__(self):
        self.display_fields: List[str] = [
            "sample_id",
            "category",
            "sad",
            "mse",
            "grad",
            "conn",
            "region_pixels",
        ]
        self.display_headers: Dict[str, str] = {
            "sample_id": "Sample",
            "category": "Category",
            "sad": "SAD",
            "mse": "MSE",
            "grad": "Grad",
            "conn": "Conn",
            "region_pixels": "Region px",
        }

    def display_name(self, field: str) -> str:
        return self.display_headers.get(field, field)


schema = MetricsSchema()
