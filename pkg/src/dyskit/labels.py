"""Class labels and the dysfluency taxonomy."""

from enum import Enum


class ClassLabel(str, Enum):
    # declaration order is the tie-break order used by the classifiers
    DYSFLUENT = "dysfluent"
    FLUENT = "fluent"

    @classmethod
    def parse(cls, text: str) -> "ClassLabel":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown class label {text!r}") from None

    @property
    def order(self) -> int:
        return list(ClassLabel).index(self)

    def __str__(self) -> str:
        return self.value


class DysfluencyType(str, Enum):
    REPETITION = "repetition"
    PROLONGATION = "prolongation"
    INTERJECTION = "interjection"
    PAUSE = "pause"

    @classmethod
    def parse(cls, text: str) -> "DysfluencyType | None":
        text = text.strip().lower()
        if not text:
            return None
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown dysfluency type {text!r}") from None

    def __str__(self) -> str:
        return self.value


# types the synthesizer can render
SYNTHESIZABLE = (
    DysfluencyType.REPETITION,
    DysfluencyType.PROLONGATION,
    DysfluencyType.INTERJECTION,
)
