"""
Model Service - builtin Hamiltonians, model files and their content hash
"""

import hashlib
import json
from pathlib import Path

from pydantic import ValidationError

from shadowbag.common.logger import setup_logger
from shadowbag.core.errors import ConfigError, DimensionError, UnsupportedError
from shadowbag.schemas.model import ModelFile, TermTemplate
from shadowbag.services.pauli_service import HamiltonianSpec, PauliAxis, PauliString
from shadowbag.utils.json_storage import read_json

logger = setup_logger("Model")

MAX_TERM_WEIGHT = 4


def _bond(coefficient: float, word: str) -> TermTemplate:
    return TermTemplate(coefficient=coefficient, word=word)


BUILTIN_MODELS: dict[str, ModelFile] = {
    "main": ModelFile(
        name="main",
        description="Anisotropic XYZ chain in a tilted field",
        terms=[_bond(0.25, "ZZ"), _bond(0.3, "YY"), _bond(0.3, "XX"), _bond(0.25, "Z"), _bond(0.3, "X")],
    ),
    "H1": ModelFile(
        name="H1",
        description="Critical transverse-field Ising chain",
        terms=[_bond(1.0, "X"), _bond(-1.0, "ZZ")],
    ),
    "H2": ModelFile(
        name="H2",
        description="Gapped transverse-field Ising chain",
        terms=[_bond(2.0, "X"), _bond(-1.0, "ZZ")],
    ),
    "H3": ModelFile(
        name="H3",
        description="XXZ chain in a strong longitudinal field",
        terms=[_bond(0.12, "ZZ"), _bond(0.25, "XX"), _bond(0.25, "YY"), _bond(-2.0, "Z")],
    ),
    "ising": ModelFile(
        name="ising",
        description="Classical ferromagnetic Ising chain",
        terms=[_bond(-1.0, "ZZ")],
    ),
}


def load_model_file(path: Path) -> ModelFile:
    data = read_json(path)
    if not data:
        raise ConfigError(f"Model file {path} is missing or empty")
    try:
        return ModelFile.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid model file {path}: {e}") from None


def resolve_model(ref: str | list[TermTemplate] | ModelFile) -> ModelFile:
    """Builtin name, path to a model JSON file, inline term templates, or an already loaded model."""
    if isinstance(ref, ModelFile):
        return ref
    if isinstance(ref, list):
        return ModelFile(name="inline", terms=ref)
    if ref in BUILTIN_MODELS:
        return BUILTIN_MODELS[ref]
    path = Path(ref)
    if path.suffix == ".json" or path.exists():
        return load_model_file(path)
    raise ConfigError(f"Unknown model '{ref}' (builtins: {', '.join(BUILTIN_MODELS)})")


def expand_model(model: ModelFile, L: int) -> HamiltonianSpec:
    """Place every template at each site j (periodic wrap) and sum."""
    terms = []
    for template in model.terms:
        if max(template.offsets) >= L:
            raise DimensionError(f"Term '{template.word}' spans more than L={L} sites")
        weight = sum(1 for ch in template.word if ch != "I")
        if weight > MAX_TERM_WEIGHT:
            raise UnsupportedError(
                f"Term '{template.word}' has weight {weight}; terms above weight {MAX_TERM_WEIGHT} are unsupported"
            )
        for j in range(L):
            placement = {
                j + offset: PauliAxis("IXYZ".index(ch))
                for offset, ch in zip(template.offsets, template.word)
                if ch != "I"
            }
            terms.append((template.coefficient, PauliString.from_sites(L, placement)))
    return HamiltonianSpec(terms=tuple(terms), name=model.name)


def model_hash(H: HamiltonianSpec) -> str:
    """sha256 of the canonical (label, coefficient) list; independent of term order."""
    canonical = sorted((P.label, repr(float(c))) for c, P in H.terms)
    return hashlib.sha256(json.dumps(canonical).encode("utf-8")).hexdigest()


def load_hamiltonian(ref: str | list[TermTemplate] | ModelFile, L: int) -> HamiltonianSpec:
    model = resolve_model(ref)
    H = expand_model(model, L)
    logger.debug(f"[Config] Model '{model.name}' at L={L}: {len(H.terms)} terms")
    return H
