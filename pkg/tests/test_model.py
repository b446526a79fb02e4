import json

import pytest
from pydantic import ValidationError

from shadowbag.core.errors import ConfigError, DimensionError, UnsupportedError
from shadowbag.schemas.model import ModelFile, TermTemplate
from shadowbag.services.model_service import (
    BUILTIN_MODELS,
    expand_model,
    load_hamiltonian,
    model_hash,
    resolve_model,
)
from shadowbag.services.pauli_service import HamiltonianSpec


class TestBuiltins:

    def test_main_model(self):
        H = load_hamiltonian("main", 6)
        assert H.coefficient_of("ZZIIII") == 0.25
        assert H.coefficient_of("YYIIII") == 0.3
        assert H.coefficient_of("XXIIII") == 0.3
        assert H.coefficient_of("ZIIIII") == 0.25
        assert H.coefficient_of("XIIIII") == 0.3
        assert len(H.terms) == 5 * 6

    def test_h3(self):
        words = [(t.coefficient, t.word) for t in BUILTIN_MODELS["H3"].terms]
        assert sorted(words) == sorted([(0.12, "ZZ"), (0.25, "XX"), (0.25, "YY"), (-2.0, "Z")])

    def test_periodic_wrap(self):
        H = load_hamiltonian("ising", 4)
        assert H.coefficient_of("ZIIZ") == -1.0

    def test_unknown_name(self):
        with pytest.raises(ConfigError):
            resolve_model("nope")


class TestTemplates:

    def test_default_offsets(self):
        assert TermTemplate(coefficient=1.0, word="XIZ").offsets == [0, 1, 2]

    @pytest.mark.parametrize("payload", [
        {"coefficient": 1.0, "word": "XQ"},
        {"coefficient": 1.0, "word": "XZ", "offsets": [0]},
        {"coefficient": 1.0, "word": "XZ", "offsets": [1, 1]},
        {"coefficient": 1.0, "word": "XZ", "offsets": [-1, 0]},
        {"coefficient": 2.0, "word": "I"},
        {"coefficient": 2.0, "word": "II", "offsets": [0, 3]},
    ])
    def test_invalid(self, payload):
        with pytest.raises(ValidationError):
            TermTemplate.model_validate(payload)

    def test_offsets_place_letters(self):
        model = ModelFile(name="nnn", terms=[TermTemplate(coefficient=0.5, word="ZZ", offsets=[0, 2])])
        H = expand_model(model, 5)
        assert H.coefficient_of("ZIZII") == 0.5
        assert H.coefficient_of("ZIIZI") == 0.5

    def test_span_beyond_chain(self):
        model = ModelFile(name="long", terms=[TermTemplate(coefficient=1.0, word="ZZ", offsets=[0, 4])])
        with pytest.raises(DimensionError):
            expand_model(model, 4)

    def test_heavy_terms(self):
        model = ModelFile(name="heavy", terms=[TermTemplate(coefficient=1.0, word="XXXXX")])
        with pytest.raises(UnsupportedError):
            expand_model(model, 6)

    def test_inline_list(self):
        H = load_hamiltonian([{"coefficient": -1.0, "word": "ZZ"}], 3)
        assert H.name == "inline"
        assert H.coefficient_of("ZZI") == -1.0


class TestModelFiles:

    def test_load_from_json(self, tmp_path):
        path = tmp_path / "xx.json"
        path.write_text(json.dumps({"name": "xx", "terms": [{"coefficient": 1.0, "word": "XX"}]}))
        H = load_hamiltonian(str(path), 4)
        assert H.name == "xx"
        assert H.coefficient_of("XXII") == 1.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            resolve_model(str(tmp_path / "absent.json"))

    def test_invalid_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"name": "bad", "terms": []}))
        with pytest.raises(ConfigError):
            resolve_model(str(path))

    def test_constant_term_is_rejected(self, tmp_path):
        path = tmp_path / "shifted.json"
        path.write_text(json.dumps({"name": "shifted", "terms": [
            {"coefficient": -1.0, "word": "ZZ"},
            {"coefficient": 3.0, "word": "I"},
        ]}))
        with pytest.raises(ConfigError):
            resolve_model(str(path))


class TestHash:

    def test_independent_of_term_order(self):
        H = load_hamiltonian("main", 4)
        shuffled = HamiltonianSpec(terms=tuple(reversed(H.terms)), name="other")
        assert model_hash(shuffled) == model_hash(H)

    def test_distinguishes_models(self):
        assert model_hash(load_hamiltonian("H1", 4)) != model_hash(load_hamiltonian("H2", 4))
        assert model_hash(load_hamiltonian("H1", 4)) != model_hash(load_hamiltonian("H1", 6))

