"""
JSON formats for parameters and systems.

A system file looks like

    {
      "name": "laplace",
      "p": 1,
      "n": 2,
      "ops": [[{"terms": [{"mu": [2, 0], "coeff": {"re": 1}},
                          {"mu": [0, 2], "coeff": {"re": 1}}]}]],
      "dn": {"l": [0], "m": [2]}
    }

where each coefficient is either a constant `{"re": …, "im": …}` or a
trigonometric polynomial `{"fourier": [{"mode": [1, 0], "re": 0.5}, …]}`.
"""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Annotated, Literal

import pydantic

from .dnsystem import Coefficient, DiffOp, DNNumbers, DNSystem
from .roparam import Power, PowerLog, PowerSinLog


if TYPE_CHECKING:
    from .roparam import ROParam


__all__ = [
    "ComplexSpec",
    "FourierModeSpec",
    "FourierSpec",
    "OpSpec",
    "ParamSpec",
    "PowerLogSpec",
    "PowerSinLogSpec",
    "PowerSpec",
    "SystemSpec",
    "TermSpec",
    "dump_system",
    "load_system",
    "parse_param",
]


class _Spec(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(extra="forbid", frozen=True)


class PowerSpec(_Spec):
    kind: Literal["power"] = "power"
    s: float

    def build(self) -> ROParam:
        return Power(self.s)


class PowerLogSpec(_Spec):
    kind: Literal["powerlog"] = "powerlog"
    s: float
    r: float

    def build(self) -> ROParam:
        return PowerLog(self.s, self.r)


class PowerSinLogSpec(_Spec):
    kind: Literal["powersinlog"] = "powersinlog"
    s: float
    delta: float

    def build(self) -> ROParam:
        return PowerSinLog(self.s, self.delta)


type ParamSpec = Annotated[
    PowerSpec | PowerLogSpec | PowerSinLogSpec, pydantic.Field(discriminator="kind")
]

_PARAM_ADAPTER: pydantic.TypeAdapter[PowerSpec | PowerLogSpec | PowerSinLogSpec] = (
    pydantic.TypeAdapter(ParamSpec)
)
_ARGUMENTS = {"power": ("s",), "powerlog": ("s", "r"), "powersinlog": ("s", "delta")}


def parse_param(text: str) -> ROParam:
    """
    Parse `KIND:ARGS`, for example `power:1.5`, `powerlog:2,3` or `powersinlog:0,1`.

    Raises:
        ValueError: for an unknown kind or the wrong number of arguments.
    """
    kind, _, args = text.partition(":")
    kind = kind.strip().lower()
    if kind not in _ARGUMENTS:
        msg = f"unknown parameter kind {kind!r}; expected one of {', '.join(_ARGUMENTS)}"
        raise ValueError(msg)
    names = _ARGUMENTS[kind]
    values = [value.strip() for value in args.split(",")] if args.strip() else []
    if len(values) != len(names):
        msg = f"{kind} takes {len(names)} argument(s): {', '.join(names)}"
        raise ValueError(msg)
    try:
        spec = _PARAM_ADAPTER.validate_python({"kind": kind, **dict(zip(names, values, strict=True))})
    except pydantic.ValidationError as error:
        raise ValueError(str(error)) from error
    return spec.build()


class ComplexSpec(_Spec):
    re: float = 0.0
    im: float = 0.0

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)


class FourierModeSpec(ComplexSpec):
    mode: list[int]


class FourierSpec(_Spec):
    fourier: list[FourierModeSpec]


class TermSpec(_Spec):
    mu: list[pydantic.NonNegativeInt]
    coeff: ComplexSpec | FourierSpec

    def build(self, n: int) -> tuple[tuple[int, ...], Coefficient]:
        if isinstance(self.coeff, FourierSpec):
            coefficient = Coefficient(
                n, tuple((tuple(m.mode), m.value) for m in self.coeff.fourier)
            )
        else:
            coefficient = Coefficient.constant(self.coeff.value, n)
        return tuple(self.mu), coefficient


class OpSpec(_Spec):
    terms: list[TermSpec] = pydantic.Field(default_factory=list)

    def build(self, n: int) -> DiffOp:
        return DiffOp(n, tuple(term.build(n) for term in self.terms))


class DNSpec(_Spec):
    l: list[float]  # noqa: E741
    m: list[float]


class SystemSpec(_Spec):
    name: str = ""
    p: pydantic.PositiveInt
    n: Annotated[int, pydantic.Field(ge=1, le=3)]
    ops: list[list[OpSpec]]
    dn: DNSpec | None = None

    def build(self) -> DNSystem:
        """
        Raises:
            ShapeMismatch: if `ops` is not `p × p` or a multi-index has the wrong length.
            ConditionViolation: if the DN numbers do not bound the orders.
        """
        ops = tuple(tuple(op.build(self.n) for op in row) for row in self.ops)
        dn = None if self.dn is None else DNNumbers(tuple(self.dn.l), tuple(self.dn.m))
        return DNSystem(self.p, self.n, ops, dn)

    @classmethod
    def from_system(cls, sys: DNSystem, name: str = "") -> SystemSpec:
        def coeff(coefficient: Coefficient) -> ComplexSpec | FourierSpec:
            if coefficient.is_constant:
                value = coefficient.constant_value
                return ComplexSpec(re=value.real, im=value.imag)
            return FourierSpec(
                fourier=[
                    FourierModeSpec(mode=list(mode), re=value.real, im=value.imag)
                    for mode, value in coefficient.modes
                ]
            )

        ops = [
            [
                OpSpec(terms=[TermSpec(mu=list(mu), coeff=coeff(c)) for mu, c in op.terms])
                for op in row
            ]
            for row in sys.ops
        ]
        dn = None if sys.dn is None else DNSpec(l=list(sys.dn.l), m=list(sys.dn.m))
        return cls(name=name, p=sys.p, n=sys.n, ops=ops, dn=dn)


def load_system(path: Path | str) -> DNSystem:
    """
    Read a system file.

    Raises:
        pydantic.ValidationError: for malformed JSON, with line and column,
            or for content that does not match the schema.
    """
    return SystemSpec.model_validate_json(Path(path).read_text()).build()


def dump_system(sys: DNSystem, name: str = "") -> str:
    return SystemSpec.from_system(sys, name).model_dump_json(indent=2, exclude_none=True)
