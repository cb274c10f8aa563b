from typing import Dict, List, Optional
from pydantic import BaseModel
from .data_models import ErrorReport, SpaceCheckReport

# Output Models
class BaseOutput(BaseModel):
    success: bool
    execution_time_ms: int
    error: Optional[str] = None

class SolveOutput(BaseOutput):
    data: Optional[ErrorReport] = None
    load_case: Optional[str] = None
    csv_path: Optional[str] = None

class ConvergenceOutput(BaseOutput):
    data: List[ErrorReport] = []
    slopes: Dict[str, float] = {}
    expected_slope: Optional[int] = None
    passed: Optional[bool] = None
    csv_path: Optional[str] = None

class SpaceCheckOutput(BaseOutput):
    data: Optional[SpaceCheckReport] = None
