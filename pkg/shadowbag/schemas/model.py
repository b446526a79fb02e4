from pydantic import BaseModel, Field, model_validator


class TermTemplate(BaseModel):
    """One Pauli word placed at `site + offsets[i]` for every site (periodic wrap)."""
    coefficient: float
    word: str = Field(..., pattern=r"^[IXYZ]+$")
    offsets: list[int] | None = None

    @model_validator(mode="after")
    def _check_offsets(self):
        if set(self.word) == {"I"}:
            raise ValueError("word must act on at least one site; constant energy shifts are not terms")
        if self.offsets is None:
            self.offsets = list(range(len(self.word)))
        if len(self.offsets) != len(self.word):
            raise ValueError("offsets must have one entry per letter of word")
        if len(set(self.offsets)) != len(self.offsets):
            raise ValueError("offsets must be distinct")
        if min(self.offsets) < 0:
            raise ValueError("offsets must be non-negative")
        return self


class ModelFile(BaseModel):
    """Translation-invariant Hamiltonian sum_j h_j given by term templates"""
    name: str = Field(..., min_length=1)
    description: str = ""
    terms: list[TermTemplate] = Field(..., min_length=1)
