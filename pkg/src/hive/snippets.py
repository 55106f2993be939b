"""Execution specs: a model's callable signature plus an opaque code snippet."""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import IO, Iterable

from .errors import ParseError, SpecParseError


class SemanticType(str, Enum):
    TEXT = "text"
    AUDIO_PATH = "audio_path"
    IMAGE_PATH = "image_path"
    TABLE = "table"
    CATEGORIES = "categories"
    QUESTION = "question"
    MODEL_PATH = "model_path"
    OTHER = "other"


class Backend(str, Enum):
    STUB = "stub"
    SUBPROCESS = "subprocess"
    REMOTE = "remote"


AUDIO_EXTENSIONS = (".wav", ".mp3", ".flac", ".ogg", ".m4a")
IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png", ".gif", ".bmp", ".webp")

# Checked in order; first hit wins.
_NAME_RULES: list[tuple[re.Pattern[str], SemanticType]] = [
    (re.compile(r"model|checkpoint|ckpt|repo_id"), SemanticType.MODEL_PATH),
    (re.compile(r"audio|speech|wav|sound"), SemanticType.AUDIO_PATH),
    (re.compile(r"image|img|picture|photo"), SemanticType.IMAGE_PATH),
    (re.compile(r"categor|labels"), SemanticType.CATEGORIES),
    (re.compile(r"question|query"), SemanticType.QUESTION),
    (re.compile(r"table|data_dict|dataframe"), SemanticType.TABLE),
    (re.compile(r"text|input|prompt|context|sentence|document|src"), SemanticType.TEXT),
]


def infer_semantic_type(name: str, default: str | None = None) -> SemanticType:
    lowered = name.lower()
    for pattern, kind in _NAME_RULES:
        if pattern.search(lowered):
            return kind
    if default:
        d = default.lower()
        if d.endswith(AUDIO_EXTENSIONS):
            return SemanticType.AUDIO_PATH
        if d.endswith(IMAGE_EXTENSIONS):
            return SemanticType.IMAGE_PATH
    return SemanticType.OTHER


@dataclass(frozen=True)
class Param:
    name: str
    semantic_type: SemanticType = SemanticType.OTHER
    default: str | None = None


@dataclass(frozen=True)
class ExecutionSpec:
    model_id: str
    params: tuple[Param, ...]
    snippet: str
    function_name: str = "run"
    backend: Backend = Backend.STUB
    borrowed_from: str | None = None

    def param(self, name: str) -> Param | None:
        for p in self.params:
            if p.name == name:
                return p
        return None

    def with_model_path(self, model_id: str, borrowed_from: str) -> "ExecutionSpec":
        """Copy of this spec re-targeted at another model (fallback strategy)."""
        params = []
        touched = False
        for p in self.params:
            if p.semantic_type is SemanticType.MODEL_PATH:
                params.append(Param(p.name, p.semantic_type, model_id))
                touched = True
            else:
                params.append(p)
        if not touched:
            params.append(Param("model_path", SemanticType.MODEL_PATH, model_id))
        return ExecutionSpec(
            model_id=model_id,
            params=tuple(params),
            snippet=self.snippet,
            function_name=self.function_name,
            backend=self.backend,
            borrowed_from=borrowed_from,
        )

    def to_record(self) -> dict:
        rec = {
            "model_id": self.model_id,
            "function": self.function_name,
            "backend": self.backend.value,
            "params": [
                {"name": p.name, "semantic_type": p.semantic_type.value, "default": p.default}
                for p in self.params
            ],
            "snippet": self.snippet,
        }
        if self.borrowed_from:
            rec["borrowed_from"] = self.borrowed_from
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "ExecutionSpec":
        return cls(
            model_id=rec["model_id"],
            function_name=rec.get("function", "run"),
            backend=Backend(rec.get("backend", "stub")),
            params=tuple(
                Param(p["name"], SemanticType(p.get("semantic_type", "other")), p.get("default"))
                for p in rec.get("params", [])
            ),
            snippet=rec.get("snippet", ""),
            borrowed_from=rec.get("borrowed_from"),
        )


_FENCE_RE = re.compile(r"```[ \t]*([A-Za-z0-9_+-]*)[ \t]*\n(.*?)```", re.DOTALL)


def extract_fenced_code(reply: str) -> str | None:
    """Return the body of the first fenced block, preferring python-tagged ones."""
    blocks = _FENCE_RE.findall(reply)
    if not blocks:
        return None
    for lang, body in blocks:
        if lang.lower() in ("python", "py"):
            return body.strip("\n")
    return blocks[0][1].strip("\n")


def _default_to_str(node: ast.expr) -> str:
    if isinstance(node, ast.Constant) and isinstance(node.value, str):
        return node.value
    return ast.unparse(node)


def signature_from_code(code: str, model_id: str) -> tuple[str, tuple[Param, ...]]:
    """Parse ``code`` and return (function name, params) of its first function.

    Every parameter must carry a default value; otherwise SpecParseError.
    """
    try:
        tree = ast.parse(code)
    except SyntaxError as exc:
        raise SpecParseError(f"snippet is not valid python: {exc.msg}") from exc
    func = next(
        (n for n in tree.body if isinstance(n, (ast.FunctionDef, ast.AsyncFunctionDef))),
        None,
    )
    if func is None:
        raise SpecParseError("snippet defines no function")
    args = func.args
    positional = list(args.posonlyargs) + list(args.args)
    pos_defaults: list[ast.expr | None] = [None] * (len(positional) - len(args.defaults))
    pos_defaults += list(args.defaults)
    pairs = list(zip(positional, pos_defaults)) + list(zip(args.kwonlyargs, args.kw_defaults))
    params = []
    for arg, default in pairs:
        if default is None:
            raise SpecParseError(f"parameter {arg.arg!r} has no default value")
        value = _default_to_str(default)
        params.append(Param(arg.arg, infer_semantic_type(arg.arg, value), value))
    if not any(p.semantic_type is SemanticType.MODEL_PATH for p in params):
        # the model path is always a parameter, defaulting to the model id
        params.append(Param("model_path", SemanticType.MODEL_PATH, model_id))
    return func.name, tuple(params)


# --- sidecar spec file --------------------------------------------------------


def specs_path_for(graph_path: str | Path) -> Path:
    p = Path(graph_path)
    name = p.name
    if name.endswith(".jsonl"):
        name = name[: -len(".jsonl")]
    return p.with_name(name + ".specs.jsonl")


def load_specs(stream: IO[str] | Iterable[str]) -> dict[str, ExecutionSpec]:
    """Read ``{"snippet": <local name>, "spec": {...}}`` lines."""
    out: dict[str, ExecutionSpec] = {}
    for line_no, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rec = json.loads(line)
            out[rec["snippet"]] = ExecutionSpec.from_record(rec["spec"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"bad spec record: {exc}", line_no) from exc
    return out


def dump_specs(specs: dict[str, ExecutionSpec]) -> str:
    lines = [
        json.dumps({"snippet": name, "spec": specs[name].to_record()}, sort_keys=True)
        for name in sorted(specs)
    ]
    return "".join(line + "\n" for line in lines)
