"""Serialization and parsing of task prompts and target sequences.

The serialized forms are the wire format between the data pipeline and the
model: emit "; " between clauses with a final ".", accept both "; " and ". "
clause separation when parsing model output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .data import ConceptDescription, PromptEG, PromptMD, TargetSequence, Task


@dataclass(frozen=True)
class CodecConfig:
    md_descriptor: str = "[MD]"
    eg_descriptor: str = "[EG]"
    pair_separator_emit: str = "; "
    clause_terminator: str = "."
    copula: str = " is "
    concept_separator: str = ", "
    type_desc_open: str = "{"
    type_desc_close: str = "}"
    type_list_separator: str = "; "
    type_desc_colon: str = ": "

    def __post_init__(self) -> None:
        literals = [
            self.md_descriptor, self.eg_descriptor, self.pair_separator_emit,
            self.clause_terminator, self.copula, self.concept_separator,
            self.type_desc_open, self.type_desc_close, self.type_desc_colon,
        ]
        if any(not lit for lit in literals):
            raise ValueError("codec literals must be non-empty")
        if len({self.md_descriptor, self.eg_descriptor}) != 2:
            raise ValueError("task descriptors must differ")


DEFAULT_CODEC = CodecConfig()

# Surfaces/labels containing these cannot survive a serialize->parse round trip;
# the corpus builder drops such mentions. A bare "." is fine: the clause splitter
# only honors ". " when the copula appears on both sides, so "J.K. Rowling" parses.
UNSAFE_IN_SURFACE = (" is ", "; ", ", ")


def surface_is_safe(text: str, cfg: CodecConfig = DEFAULT_CODEC) -> bool:
    return not any(sep in text for sep in (cfg.copula, cfg.type_list_separator, cfg.concept_separator))


def serialize_prompt_md(prompt: PromptMD, cfg: CodecConfig = DEFAULT_CODEC) -> str:
    return cfg.md_descriptor + " " + cfg.pair_separator_emit.join(prompt.targets)


def serialize_prompt_eg(prompt: PromptEG, cfg: CodecConfig = DEFAULT_CODEC) -> str:
    rendered = []
    for entry in prompt.entries:
        if entry.concepts:
            inner = cfg.concept_separator.join(entry.concepts)
            rendered.append(
                entry.type_id + cfg.type_desc_colon + cfg.type_desc_open + inner + cfg.type_desc_close
            )
        else:
            rendered.append(entry.type_id)
    return cfg.eg_descriptor + " " + cfg.type_list_separator.join(rendered)


def serialize_target(target: TargetSequence, cfg: CodecConfig = DEFAULT_CODEC) -> str:
    if not target.pairs:
        return ""
    clauses = [
        surface + cfg.copula + cfg.concept_separator.join(labels)
        for surface, labels in target.pairs
    ]
    return cfg.pair_separator_emit.join(clauses) + cfg.clause_terminator


@dataclass
class ParseResult:
    target: TargetSequence
    diagnostics: list[str] = field(default_factory=list)


def _split_clauses(text: str, cfg: CodecConfig) -> list[str]:
    """Split on "; " unconditionally; honor ". " only when the copula appears on
    both sides, so abbreviation periods inside surfaces do not break clauses."""
    clauses: list[str] = []
    for piece in text.split(cfg.type_list_separator):
        start = 0
        search = 0
        while True:
            j = piece.find(". ", search)
            if j < 0:
                break
            left = piece[start:j]
            rest = piece[j + 2:]
            if cfg.copula in left and cfg.copula in rest:
                clauses.append(left)
                start = j + 2
                search = start
            else:
                search = j + 1
        clauses.append(piece[start:])
    return clauses


def parse_generated(task: Task, text: str, cfg: CodecConfig = DEFAULT_CODEC) -> ParseResult:
    """Parse untrusted generated text into (surface, labels) pairs.

    Never raises: malformed clauses are dropped and reported, a fully
    unparseable text yields an empty target. Duplicate pairs are kept.
    """
    diagnostics: list[str] = []
    pairs: list[tuple[str, tuple[str, ...]]] = []
    body = text.strip()
    if body.endswith(cfg.clause_terminator):
        body = body[: -len(cfg.clause_terminator)]
    if body:
        for clause in _split_clauses(body, cfg):
            clause = clause.strip()
            if not clause:
                diagnostics.append("empty clause")
                continue
            cut = clause.rfind(cfg.copula)
            if cut < 0:
                diagnostics.append(f"no copula in clause {clause!r}")
                continue
            surface = clause[:cut]
            label_part = clause[cut + len(cfg.copula):]
            if not surface or not label_part:
                diagnostics.append(f"empty side in clause {clause!r}")
                continue
            if task == "MD":
                labels = tuple(l for l in label_part.split(cfg.concept_separator) if l)
                if not labels:
                    diagnostics.append(f"no labels in clause {clause!r}")
                    continue
            else:
                labels = (label_part,)
            pairs.append((surface, labels))
    return ParseResult(TargetSequence(task=task, pairs=tuple(pairs)), diagnostics)


def parse_prompt_md(text: str, cfg: CodecConfig = DEFAULT_CODEC) -> PromptMD:
    prefix = cfg.md_descriptor + " "
    if not text.startswith(prefix):
        raise ValueError(f"mention-describing prompt must start with {prefix!r}")
    targets = text[len(prefix):].split(cfg.pair_separator_emit)
    return PromptMD(targets=tuple(targets))


def parse_prompt_eg(text: str, cfg: CodecConfig = DEFAULT_CODEC) -> PromptEG:
    """Accept both "type" and "type: {}" entry forms."""
    prefix = cfg.eg_descriptor + " "
    if not text.startswith(prefix):
        raise ValueError(f"entity-generation prompt must start with {prefix!r}")
    entries = []
    for chunk in text[len(prefix):].split(cfg.type_list_separator):
        if cfg.type_desc_colon in chunk:
            type_id, desc = chunk.split(cfg.type_desc_colon, 1)
            if not (desc.startswith(cfg.type_desc_open) and desc.endswith(cfg.type_desc_close)):
                raise ValueError(f"malformed type description in {chunk!r}")
            inner = desc[len(cfg.type_desc_open): -len(cfg.type_desc_close)]
            concepts = tuple(c for c in inner.split(cfg.concept_separator) if c) if inner else ()
            entries.append(ConceptDescription(type_id=type_id, concepts=concepts))
        else:
            entries.append(ConceptDescription(type_id=chunk))
    return PromptEG(entries=tuple(entries))
