"""Analysis reports: a stable line-oriented text body and a JSON document.

The body of a report depends only on the inputs, so repeated runs diff clean.
Wall-clock timings live outside the body and are rendered only on request.
"""

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from dataclasses_json import dataclass_json

TIMING_MARKER = "# timing"


def digest(text: str) -> str:
    """Short content digest identifying an input file in the report echo."""
    return "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass_json
@dataclass
class ReportTable:
    title: str
    columns: List[str]
    rows: List[List[str]] = field(default_factory=list)

    def add_row(self, *cells: Any) -> None:
        if len(cells) != len(self.columns):
            raise ValueError(f"Row has {len(cells)} cells, table {self.title!r} has {len(self.columns)}")
        self.rows.append([str(c) for c in cells])


@dataclass_json
@dataclass
class ReportSection:
    """Ordered key/value fields followed by zero or more tables."""

    title: str
    fields: List[List[str]] = field(default_factory=list)
    tables: List[ReportTable] = field(default_factory=list)

    def add_field(self, key: str, value: Any) -> None:
        self.fields.append([key, "-" if value is None else str(value)])

    def add_table(self, title: str, columns: Sequence[str]) -> ReportTable:
        table = ReportTable(title, list(columns))
        self.tables.append(table)
        return table

    def get(self, key: str) -> Optional[str]:
        for name, value in self.fields:
            if name == key:
                return value
        return None


@dataclass_json
@dataclass
class AnalysisReport:
    """Result of one CLI command."""

    command: str
    arguments: List[List[str]] = field(default_factory=list)
    inputs: List[List[str]] = field(default_factory=list)
    sections: List[ReportSection] = field(default_factory=list)
    verdict: str = ""
    exit_code: int = 0
    timing: Dict[str, float] = field(default_factory=dict)

    def add_argument(self, name: str, value: Any) -> None:
        self.arguments.append([name, "-" if value is None else str(value)])

    def add_input(self, name: str, text: str) -> None:
        self.inputs.append([name, digest(text)])

    def add_section(self, title: str) -> ReportSection:
        section = ReportSection(title)
        self.sections.append(section)
        return section

    def section(self, title: str) -> ReportSection:
        for section in self.sections:
            if section.title == title:
                return section
        raise KeyError(f"No report section {title!r}")

    def render_text(self, include_timing: bool = False) -> str:
        lines = [f"command: {self.command}"]
        lines.extend(f"arg.{name}: {value}" for name, value in self.arguments)
        lines.extend(f"input.{name}: {value}" for name, value in self.inputs)

        for section in self.sections:
            lines.append("")
            lines.append(f"[{section.title}]")
            lines.extend(f"{key}: {value}" for key, value in section.fields)
            for table in section.tables:
                lines.append(f"table {table.title}")
                lines.append(" ".join(table.columns))
                lines.extend(" ".join(row) for row in table.rows)
                lines.append("end")

        lines.append("")
        lines.append(f"verdict: {self.verdict}")

        if include_timing and self.timing:
            lines.append(TIMING_MARKER)
            lines.extend(f"# {name}: {seconds:.3f}s" for name, seconds in sorted(self.timing.items()))
        return "\n".join(lines) + "\n"

    def render_json(self, include_timing: bool = False) -> str:
        data = self.to_dict()  # type: ignore[attr-defined]
        if not include_timing:
            data.pop("timing", None)
        return json.dumps(data, indent=2, ensure_ascii=False) + "\n"

    def render(self, output_format: str = "text", include_timing: bool = False) -> str:
        if output_format == "json":
            return self.render_json(include_timing)
        return self.render_text(include_timing)
