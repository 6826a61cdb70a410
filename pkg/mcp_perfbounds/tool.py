"""
MCP Tool Handler for perfbounds.bound

Wraps the bound engine in an MCP-compatible interface. The constants profile is
accepted inline or as an artifact reference.
"""

from __future__ import annotations

import json
from typing import Any, Callable, Optional

from perfbounds.bounds import VARIANTS, BoundReport, compute_bound
from perfbounds.domain import ConstantsProfile, constants_audit

PARAM_NAMES = ("T", "T_tilde", "m", "n", "m_list", "R", "eps", "complexity", "B")
FAIL_ON = ("none", "audit")


def handle(
    request: dict[str, Any],
    *,
    artifact_resolver: Optional[Callable[[str], bytes]] = None,
) -> dict[str, Any]:
    """
    MCP tool handler for perfbounds.bound.

    Args:
        request: Request dict matching the request schema.
        artifact_resolver: Optional callable to resolve artifact_id -> bytes.
            Without it the reference's locator is read as a path.

    Returns:
        Response dict matching the response schema. exit_code is 1 on errors and
        2 when ``fail_on="audit"`` and the profile audit raised findings.
    """
    variant = request.get("variant")
    if variant not in VARIANTS:
        return _error_response(f"Unknown bound variant: {variant!r}")
    fail_on = request.get("fail_on", "none")
    if fail_on not in FAIL_ON:
        return _error_response(f"fail_on must be one of {', '.join(FAIL_ON)}")

    try:
        profile = _load_profile(request.get("profile"), artifact_resolver=artifact_resolver)
    except FileNotFoundError as e:
        return _error_response(f"Profile file not found: {e}")
    except json.JSONDecodeError as e:
        return _error_response(f"Invalid JSON in profile: {e}")
    except ValueError as e:
        return _error_response(str(e))
    except Exception as e:
        return _error_response(f"Failed to load profile: {e}")

    params = request.get("params", {})
    unknown = sorted(set(params) - set(PARAM_NAMES))
    if unknown:
        return _error_response(f"Unknown params: {', '.join(unknown)}")

    try:
        report = compute_bound(variant, profile, **params)
    except Exception as e:
        return _error_response(f"Bound evaluation failed: {e}")

    audit = constants_audit(profile)
    response: dict[str, Any] = {
        "exit_code": 2 if fail_on == "audit" and audit else 0,
        "result": {"report": report.to_dict(), "audit": audit},
        "warnings": sorted(audit),
    }
    if request.get("format") == "text":
        response["text"] = _format_text_output(report, audit)
    return response


def _load_profile(
    source: Any,
    *,
    artifact_resolver: Optional[Callable[[str], bytes]] = None,
) -> ConstantsProfile:
    """
    Profile from an inline dict, a ``{"profile": ...}`` wrapper, or an artifact reference.

    Raises:
        ValueError: On a missing or malformed profile.
        FileNotFoundError: If the locator path doesn't exist.
        json.JSONDecodeError: If artifact content is not valid JSON.
    """
    if not isinstance(source, dict):
        raise ValueError("profile must be an object")

    data: Any = source
    if "artifact_id" in source:
        if artifact_resolver is not None:
            data = json.loads(artifact_resolver(source["artifact_id"]).decode("utf-8"))
        else:
            locator = source.get("locator")
            if not locator:
                raise ValueError("artifact reference requires either artifact_resolver or locator")
            with open(locator, encoding="utf-8") as f:
                data = json.load(f)

    if isinstance(data, dict) and "profile" in data:
        data = data["profile"]
    if not isinstance(data, dict):
        raise ValueError("profile must be an object")
    return ConstantsProfile.from_dict(data)


def _format_text_output(report: BoundReport, audit: list[str]) -> str:
    lines = ["=" * 60, f"perfbounds: {report.name}", "=" * 60]
    lines.append(f"Total: {report.total:.6g} (confidence {report.confidence:.4g})")
    lines.append("")
    lines.append("Terms:")
    for name, value in report.terms.items():
        lines.append(f"  {name:<22} {value:.6g}")
    if report.factors:
        lines.append("Factors:")
        for name, value in report.factors.items():
            lines.append(f"  {name:<22} {value:.6g}")
    if audit:
        lines.append("")
        lines.append(f"Audit findings: {len(audit)}")
        lines.extend(f"  [!] {finding}" for finding in audit)
    return "\n".join(lines)


def _error_response(message: str) -> dict[str, Any]:
    return {
        "exit_code": 1,
        "result": {
            "report": None,
            "audit": [],
        },
        "warnings": [message],
    }
