# transmat/schemas/params_schema.py
"""
Parameter Count Schema
----------------------
Display fields for the per-preset parameter breakdown.
"""

from typing import Dict, List


class ParamsSchema:
    def __init__(self):
        self.display_fields: List[str] = ["preset", "encoder", "tri_tokens", "decoder", "mgf", "total"]
        self.display_headers: Dict[str, str] = {
            "preset": "Preset",
            "encoder": "Encoder",
            "tri_tokens": "Tri-tokens",
            "decoder": "Decoder",
            "mgf": "MGF",
            "total": "Total",
        }


schema = ParamsSchema()
