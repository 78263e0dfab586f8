# transmat/schemas/gradcheck_schema.py
"""
Gradcheck Schema
----------------
Display fields and headers for gradient-check results.
"""

from typing import Dict, List


class GradcheckSchema:
    def __init__(self):
        self.display_fields: List[str] = [
            "component",
            "seed",
            "status",
            "max_rel_error",
            "tolerance",
            "worst_tensor",
            "tensors",
        ]
        self.display_headers: Dict[str, str] = {
            "component": "Component",
            "seed": "Seed",
            "status": "Status",
            "max_rel_error": "Max Rel Error",
            "tolerance": "Tolerance",
            "worst_tensor": "Worst Tensor",
            "tensors": "Tensors",
        }


schema = GradcheckSchema()
