"""Three-valued check records shared by all diagnostic stages.

Every numerical test in the toolkit grades out as pass, fail or
inconclusive; limit-like claims additionally carry "-indicated"
wording in their statements because they rest on finite probing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = ["PASS", "FAIL", "INCONCLUSIVE_GRADE", "GradedCheck"]

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE_GRADE = "inconclusive"


@dataclass
class GradedCheck:
    """Outcome of one diagnostic stage.

    ``statement`` records, in plain words, the criterion that was
    evaluated; ``detail`` holds the supporting numbers so reports can be
    audited without rerunning.
    """

    name: str
    status: str
    statement: str
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "statement": self.statement,
            "detail": self.detail,
        }
