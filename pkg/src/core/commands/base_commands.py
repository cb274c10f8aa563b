import sys
import time
from typing import Any, List, Optional, TextIO

import structlog
import ujson
from pydantic import BaseModel

from src.core.mesh import Mesh, parse_mesh_source
from src.models.data_models import RunConfig
from src.services.report_processor import ReportProcessor

logger = structlog.get_logger()


class BaseCommands:
    def __init__(self, report_processor: Optional[ReportProcessor] = None, stream: Optional[TextIO] = None):
        self.report_processor = report_processor or ReportProcessor()
        self.stream = stream

    def _emit(self, text: str) -> None:
        print(text, file=self.stream or sys.stdout)

    def _render(self, output: BaseModel, config: RunConfig, markdown: str) -> str:
        if config.format == "json":
            return ujson.dumps(output.model_dump(mode="json"), indent=2)
        return markdown

    def _load_mesh(self, config: RunConfig, level: Optional[int] = None) -> Mesh:
        return parse_mesh_source(config.mesh, seed=config.seed, level=level)

    def _elapsed_ms(self, start: float) -> int:
        return int((time.perf_counter() - start) * 1000)

    def _format_float(self, value: Any, digits: int = 4) -> str:
        if value is None:
            return "-"
        try:
            return f"{float(value):.{digits}e}"
        except (TypeError, ValueError):
            return str(value)

    def _format_header(self, title: str, config: RunConfig) -> str:
        content = f"# {title}\n\n"
        content += f"**Params**: (p1, p2, r) = ({config.p1}, {config.p2}, {config.r})\n"
        content += f"**Mesh**: {config.mesh}\n"
        return content + "\n"

    def _format_table(self, headers: List[str], rows: List[List[Any]]) -> str:
        content = "| " + " | ".join(headers) + " |\n"
        content += "|" + "|".join("---" for _ in headers) + "|\n"
        for row in rows:
            content += "| " + " | ".join(str(cell) for cell in row) + " |\n"
        return content

    def _format_check(self, label: str, ok: Optional[bool], detail: str = "") -> str:
        mark = "n/a" if ok is None else ("ok" if ok else "FAILED")
        suffix = f" ({detail})" if detail else ""
        return f"- {label}: {mark}{suffix}\n"
