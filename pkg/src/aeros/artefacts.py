"""Lettered assurance artefacts, the registry that holds them, and arguments.

Artefacts are stored by reference (a file path) plus a SHA-256 digest. The
registry journals every registration to an append-only JSONL file and
re-hashes referenced files before any argument is instantiated, so a
changed byte anywhere in the evidence stops the argument from being built.

Argument patterns are JSON outlines whose node texts carry placeholders
such as ``{E}`` or ``{L.0}``. Stage-5 patterns may also expand one node per
requirement with a ``foreach`` key.
"""

from __future__ import annotations

import enum
import hashlib
import json
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence


class ArtefactError(ValueError):
    pass


class TamperError(ArtefactError):
    """A referenced artefact no longer matches its registered digest."""


class UnboundPlaceholderError(ArtefactError):
    def __init__(self, missing: Iterable[str]):
        self.missing = tuple(sorted(set(missing), key=_letter_key))
        super().__init__("unbound placeholder(s): " + ", ".join(self.missing))


@dataclass(frozen=True)
class Wiring:
    letter: str
    name: str
    stage: int
    activity: int  # 0 = supplied from outside the process
    inputs: tuple[str, ...] = ()

    @property
    def external(self) -> bool:
        return self.activity == 0


_W = Wiring
WIRING: dict[str, Wiring] = {w.letter: w for w in (
    _W("A", "System Safety Requirements", 1, 0),
    _W("B", "Environment Description", 1, 0),
    _W("C", "System Description", 1, 0),
    _W("D", "EB Description and Expected Output", 1, 0),
    _W("E", "Safety Requirements Allocated to the Swarm", 1, 1, ("A", "B", "C", "D")),
    _W("F", "EB Assurance Scoping Argument Pattern", 1, 0),
    _W("G", "Instantiated EB Assurance Scoping Argument", 1, 2, ("A", "B", "C", "D", "E", "F")),
    _W("H", "EB Safety Requirements", 2, 3, ("E",)),
    _W("I", "EB Safety Requirements Argument", 2, 5, ("H",)),
    _W("L.0", "Data Type Requirements", 3, 6, ("H",)),
    _W("L.1", "Data Availability Constraints", 3, 6, ("H",)),
    _W("M", "Data Requirements Justification Report", 3, 6, ("H", "L.0", "L.1")),
    _W("N", "Test Environment", 3, 7, ("L.0", "L.1")),
    _W("O", "Swarm Performance Metrics", 3, 7, ("L.0", "L.1")),
    _W("P", "Verification Metrics and Scenarios", 3, 7, ("H", "L.0", "L.1")),
    _W("Q", "Sensing and Metric Assumptions Log", 3, 7, ("N", "O", "P")),
    _W("S", "Swarm Evaluation Validation Results", 3, 8, ("L.0", "L.1", "N", "O", "P")),
    _W("R", "EB Data Argument", 3, 9, ("L.0", "L.1", "M", "N", "O", "P", "Q", "S")),
    _W("U", "Candidate EB", 4, 10, ("H", "L.0", "L.1", "N")),
    _W("V", "Model Development Log", 4, 10, ("H", "L.0", "L.1")),
    _W("W", "EB Algorithm", 4, 11, ("U", "O")),
    _W("Y", "Internal Test Results", 4, 11, ("U", "O")),
    _W("X", "EB Argument", 4, 12, ("U", "V", "W", "Y")),
    _W("AA", "Verification Results", 5, 13, ("H", "P", "W")),
    _W("BB", "Verification Log", 5, 13, ("AA",)),
    _W("CC", "EB Verification Argument", 5, 14, ("H", "P", "W", "AA", "BB")),
    _W("EE", "Erroneous Behaviour Log", 6, 15, ("A", "B", "C", "W")),
    _W("FF", "Operational Scenarios", 6, 16, ("B",)),
    _W("GG", "Integration Testing Results", 6, 16, ("FF", "H", "W")),
    _W("HH", "EB Deployment Argument", 6, 17, ("EE", "FF", "GG", "W")),
)}

# Letters skipped by the process description; kept so nobody reuses them.
RESERVED = ("J", "K", "T", "Z", "DD")

STAGE_OUTPUT = {1: "G", 2: "I", 3: "R", 4: "X", 5: "CC", 6: "HH"}
REQUIRED = tuple(WIRING)

_PLACEHOLDER = re.compile(r"\{([A-Z]+(?:\.\d)?)\}")


def _letter_key(letter: str) -> tuple[int, str]:
    return (len(letter.split(".")[0]), letter)


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class Artefact:
    letter: str
    name: str
    stage: int
    content_ref: str
    digest: str
    produced_by: int
    inputs: tuple[str, ...] = ()

    def to_record(self) -> dict[str, Any]:
        return {"letter": self.letter, "name": self.name, "stage": self.stage,
                "content_ref": self.content_ref, "digest": self.digest,
                "produced_by": self.produced_by, "inputs": list(self.inputs)}


class Registry:
    """Single-writer artefact store journaled to ``<root>/registry.jsonl``.

    Registering replays nothing: the journal is the history, and an
    existing journal is loaded on open.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.journal = self.root / "registry.jsonl"
        self._items: dict[str, Artefact] = {}
        if self.journal.exists():
            for line in self.journal.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    rec = json.loads(line)
                    rec["inputs"] = tuple(rec["inputs"])
                    self._items[rec["letter"]] = Artefact(**rec)

    def __contains__(self, letter: str) -> bool:
        return letter in self._items

    def __getitem__(self, letter: str) -> Artefact:
        try:
            return self._items[letter]
        except KeyError:
            raise ArtefactError(f"artefact [{letter}] is not registered") from None

    def letters(self) -> list[str]:
        return sorted(self._items, key=_letter_key)

    def path(self, letter: str) -> Path:
        ref = Path(self[letter].content_ref)
        return ref if ref.is_absolute() else self.root / ref

    def register(self, letter: str, content: str | bytes | Path) -> Artefact:
        """Store an artefact; ``content`` is a file path or the bytes/text to store.

        Text and bytes are written under ``<root>/artefacts``. Re-registering
        identical content is a no-op; different content under a registered
        letter is refused.
        """
        if letter in RESERVED:
            raise ArtefactError(f"[{letter}] is a reserved letter with no defined artefact")
        if letter not in WIRING:
            raise ArtefactError(f"unknown artefact letter [{letter}]")
        w = WIRING[letter]
        missing = [i for i in w.inputs if i not in self._items]
        if missing:
            raise ArtefactError(f"[{letter}] needs input(s) {', '.join(f'[{m}]' for m in missing)}")
        if isinstance(content, Path):
            path = content
            if not path.exists():
                raise ArtefactError(f"[{letter}] content {path} does not exist")
        else:
            data = content.encode("utf-8") if isinstance(content, str) else content
            path = self.root / "artefacts" / f"{letter}.dat"
            if letter in self._items:
                if hashlib.sha256(data).hexdigest() == self._items[letter].digest:
                    return self._items[letter]
                raise ArtefactError(f"[{letter}] is already registered with different content")
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
        digest = sha256_file(path)
        if letter in self._items:
            if self._items[letter].digest == digest:
                return self._items[letter]
            raise ArtefactError(f"[{letter}] is already registered with different content")
        # refs inside the output directory stay relative so the tree can be moved
        home = self.root.resolve().parent
        resolved = path.resolve()
        if resolved.is_relative_to(home):
            ref = os.path.relpath(resolved, self.root.resolve())
        else:
            ref = str(resolved)
        art = Artefact(letter, w.name, w.stage, ref, digest, w.activity, w.inputs)
        self._items[letter] = art
        with self.journal.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(art.to_record(), sort_keys=True) + "\n")
        return art

    def verify(self, letters: Iterable[str] | None = None) -> None:
        """Re-hash referenced content; raise TamperError on any mismatch."""
        bad = []
        for letter in (self.letters() if letters is None else letters):
            art = self[letter]
            p = self.path(letter)
            if not p.exists() or sha256_file(p) != art.digest:
                bad.append(letter)
        if bad:
            raise TamperError("digest mismatch for " + ", ".join(f"[{b}]" for b in bad))

    def read_text(self, letter: str) -> str:
        self.verify([letter])
        return self.path(letter).read_text(encoding="utf-8")

    def completeness(self) -> dict[str, str]:
        """Each required letter mapped to registered / externally supplied / missing."""
        out = {}
        for letter in REQUIRED:
            if letter in self._items:
                out[letter] = "externally supplied" if WIRING[letter].external else "registered"
            else:
                out[letter] = "missing"
        return out


# ------------------------------------------------------------------ arguments


class NodeKind(str, enum.Enum):
    GOAL = "goal"
    STRATEGY = "strategy"
    SOLUTION = "solution"
    CONTEXT = "context"
    JUSTIFICATION = "justification"
    ASSUMPTION = "assumption"


@dataclass(frozen=True)
class ArgumentNode:
    id: str
    kind: NodeKind
    text: str
    bindings: dict[str, str] = field(default_factory=dict)  # letter -> digest
    children: tuple[ArgumentNode, ...] = ()
    requirement: str | None = None

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def to_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = {"id": self.id, "kind": self.kind.value, "text": self.text,
                               "bindings": dict(sorted(self.bindings.items()))}
        if self.requirement is not None:
            rec["requirement"] = self.requirement
        if self.children:
            rec["children"] = [c.to_record() for c in self.children]
        return rec


@dataclass(frozen=True)
class ArgumentDocument:
    stage: int
    output_letter: str
    pattern: str
    root: ArgumentNode

    def nodes(self) -> list[ArgumentNode]:
        return list(self.root.walk())

    def to_json(self) -> str:
        return json.dumps({"stage": self.stage, "output": self.output_letter,
                           "pattern": self.pattern, "root": self.root.to_record()},
                          indent=1, sort_keys=True, ensure_ascii=False) + "\n"

    def render(self) -> str:
        lines = [f"[{self.output_letter}] {self.pattern}"]

        def emit(node: ArgumentNode, depth: int) -> None:
            lines.append(f"{'  ' * depth}{node.id} ({node.kind.value}): {node.text}")
            for c in node.children:
                emit(c, depth + 1)

        emit(self.root, 0)
        return "\n".join(lines) + "\n"


def load_pattern(stage: int, path: str | Path | None = None) -> dict[str, Any]:
    if path is not None:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    res = resources.files("aeros") / "patterns" / f"stage{stage}.json"
    return json.loads(res.read_text(encoding="utf-8"))


def pattern_placeholders(pattern: Mapping[str, Any]) -> set[str]:
    found: set[str] = set()

    def scan(node: Mapping[str, Any]) -> None:
        found.update(_PLACEHOLDER.findall(node.get("text", "")))
        found.update(node.get("bind", ()))
        for c in node.get("children", ()):
            scan(c)

    scan(pattern["root"])
    return found


def instantiate_argument(stage: int, registry: Registry,
                         requirements: Sequence[tuple[str, str]] | None = None,
                         pattern_path: str | Path | None = None) -> ArgumentDocument:
    """Bind a stage's argument pattern to registered artefacts.

    Every placeholder must name a registered artefact whose referenced
    content still matches its digest. ``requirements`` lists (id, text)
    pairs for ``foreach`` nodes; by default they come from artefact [H].
    """
    if stage not in STAGE_OUTPUT:
        raise ArtefactError(f"no argument pattern for stage {stage}")
    pattern = load_pattern(stage, pattern_path)
    needed = pattern_placeholders(pattern)
    missing = [p for p in needed if p not in registry]
    if missing:
        raise UnboundPlaceholderError(missing)
    registry.verify(sorted(needed, key=_letter_key))
    if requirements is None and _has_foreach(pattern["root"]):
        requirements = _requirements_from(registry)

    def bind_text(text: str) -> tuple[str, dict[str, str]]:
        bound: dict[str, str] = {}

        def sub(m: re.Match) -> str:
            letter = m.group(1)
            art = registry[letter]
            bound[letter] = art.digest
            return f"[{letter}] {art.name} (sha256:{art.digest[:12]})"

        return _PLACEHOLDER.sub(sub, text), bound

    def build(node: Mapping[str, Any], req: tuple[str, str] | None) -> list[ArgumentNode]:
        if "foreach" in node and req is None:
            out = []
            for r in requirements or ():
                out.extend(build({k: v for k, v in node.items() if k != "foreach"}, r))
            return out
        text = node["text"]
        nid = node["id"]
        if req is not None:
            text = text.replace("{req}", req[0]).replace("{req_text}", req[1])
            nid = nid.replace("{req}", req[0])
        text, bound = bind_text(text)
        for letter in node.get("bind", ()):
            bound[letter] = registry[letter].digest
        kind = NodeKind(node["kind"])
        if kind is NodeKind.SOLUTION and not bound:
            raise ArtefactError(f"solution node {nid} references no artefact")
        children: list[ArgumentNode] = []
        for c in node.get("children", ()):
            children.extend(build(c, req))
        return [ArgumentNode(nid, kind, text, bound, tuple(children),
                             req[0] if req is not None else None)]

    root = build(pattern["root"], None)[0]
    leftover = sorted({m for n in root.walk() for m in _PLACEHOLDER.findall(n.text)})
    if leftover:
        raise UnboundPlaceholderError(leftover)
    return ArgumentDocument(stage, STAGE_OUTPUT[stage], pattern.get("name", f"stage {stage}"), root)


def _has_foreach(node: Mapping[str, Any]) -> bool:
    return "foreach" in node or any(_has_foreach(c) for c in node.get("children", ()))


def _requirements_from(registry: Registry) -> list[tuple[str, str]]:
    out = []
    for line in registry.read_text("H").splitlines():
        if line.strip() and not line.startswith("#"):
            rec = json.loads(line)
            out.append((rec["id"], rec["text"]))
    return out


# ------------------------------------------------------------------ traceability


@dataclass(frozen=True)
class TraceLink:
    kind: str  # requirement | cell | verdict | log_entry | argument_node
    ref: str
    detail: str = ""


def trace(requirement_id: str, registry: Registry) -> list[TraceLink]:
    """Requirement -> matrix cells -> verdicts -> log entries -> argument nodes.

    Walks artefacts [H] (catalog), [P] (test matrix), [BB] (verification
    log) and [CC] (stage-5 argument). A requirement with no evidence yields
    a chain holding only the requirement itself, never an omission.
    """
    reqs = {rid: text for rid, text in _requirements_from(registry)}
    if requirement_id not in reqs:
        raise KeyError(f"unknown requirement {requirement_id}")
    chain = [TraceLink("requirement", requirement_id, reqs[requirement_id])]
    cells: dict[str, str] = {}
    if "P" in registry:
        scen = json.loads(registry.read_text("P"))
        for c in scen.get("matrix", {}).get("cells", []):
            cells[c["id"]] = c["environment"]
    if "BB" in registry:
        lines = registry.read_text("BB").splitlines()
        seen_cells = set()
        for n, line in enumerate(lines[1:], 2):
            rec = json.loads(line)
            for v in rec.get("verdicts", []):
                if v["requirement"] != requirement_id:
                    continue
                sid = rec["scenario_id"]
                if sid in cells and sid not in seen_cells:
                    seen_cells.add(sid)
                    chain.append(TraceLink("cell", sid, cells[sid]))
                chain.append(TraceLink("verdict", f"{sid}:{requirement_id}", v["status"]))
                chain.append(TraceLink("log_entry", f"BB:{n}", rec["kind"]))
    if "CC" in registry:
        doc = json.loads(registry.read_text("CC"))
        for node in _walk_record(doc["root"]):
            if node.get("requirement") == requirement_id and node["kind"] == "solution":
                chain.append(TraceLink("argument_node", f"CC:{node['id']}", node["text"]))
    return chain


def _walk_record(node: Mapping[str, Any]):
    yield node
    for c in node.get("children", ()):
        yield from _walk_record(c)


# ------------------------------------------------------------------ failure chains


def failure_chain(events: Sequence[Any]) -> list[list[Any]]:
    """Validate causal links between failure events; return root-to-leaf paths.

    Parents must exist, links must be acyclic, and a cause may never sit at
    a higher level than its effect (agent -> neighbourhood -> swarm). A
    swarm-level event that has any parent must trace back to an agent-level
    root.
    """
    from .monitors import LEVEL_RANK

    by_id = {e.id: e for e in events}
    if len(by_id) != len(events):
        raise ArtefactError("duplicate failure event ids")
    for e in events:
        if e.causal_parent is None:
            continue
        parent = by_id.get(e.causal_parent)
        if parent is None:
            raise ArtefactError(f"{e.id}: unknown causal parent {e.causal_parent}")
        if LEVEL_RANK[parent.level] > LEVEL_RANK[e.level]:
            raise ArtefactError(f"level inversion: {parent.level.value} event {parent.id} "
                                f"causes {e.level.value} event {e.id}")
    roots_of: dict[str, Any] = {}
    for e in events:
        seen = set()
        cur = e
        while cur.causal_parent is not None:
            if cur.id in seen:
                raise ArtefactError(f"causal cycle through {cur.id}")
            seen.add(cur.id)
            cur = by_id[cur.causal_parent]
        roots_of[e.id] = cur
    for e in events:
        if e.level.value == "swarm" and e.causal_parent is not None:
            if roots_of[e.id].level.value != "agent":
                raise ArtefactError(f"swarm event {e.id} has no agent-level origin")
    parents = {e.causal_parent for e in events if e.causal_parent is not None}
    paths = []
    for leaf in (e for e in events if e.id not in parents):
        path = [leaf]
        while path[-1].causal_parent is not None:
            path.append(by_id[path[-1].causal_parent])
        paths.append(list(reversed(path)))
    return paths


# ------------------------------------------------------------------ erroneous behaviour


@dataclass(frozen=True)
class ErroneousBehaviourEntry:
    scenario_id: str
    description: str
    anticipated: bool
    requirements: tuple[str, ...] = ()
    evidence: tuple[str, ...] = ()

    def to_record(self) -> dict[str, Any]:
        return {"scenario_id": self.scenario_id, "description": self.description,
                "anticipated": self.anticipated, "requirements": list(self.requirements),
                "evidence": list(self.evidence)}


class ErroneousBehaviourLog:
    """Append-only JSONL log of erroneous-behaviour entries."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.touch()

    def append(self, entries: Iterable[ErroneousBehaviourEntry]) -> None:
        with self.path.open("a", encoding="utf-8") as fh:
            for e in entries:
                fh.write(json.dumps(e.to_record(), sort_keys=True) + "\n")

    def entries(self) -> list[ErroneousBehaviourEntry]:
        out = []
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                r = json.loads(line)
                out.append(ErroneousBehaviourEntry(r["scenario_id"], r["description"],
                                                   r["anticipated"], tuple(r["requirements"]),
                                                   tuple(r["evidence"])))
        return out
