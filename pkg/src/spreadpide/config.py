"""INI run configuration.

Sections: ``[merton]`` and ``[gamma-tc]`` (model fields), ``[contract]``,
``[scheme]`` and ``[mc]``. Missing sections fall back to the built-in
defaults.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace

from .models import JumpDiffusionParams, Model, TimeChangeParams, params_from_mapping, params_to_mapping
from .pricer import Contract, SchemeConfig
from .symbol_assembly import SymbolQuadConfig

MODEL_SECTIONS = {"merton": "merton", "gamma-tc": "gamma-tc"}


@dataclass(frozen=True)
class MCConfig:
    paths: int = 1_000_000
    seed: int = 12345
    steps: int = 1


@dataclass
class RunConfig:
    merton: JumpDiffusionParams = field(default_factory=JumpDiffusionParams.reference)
    gamma_tc: TimeChangeParams = field(default_factory=TimeChangeParams.reference)
    contract: Contract = field(default_factory=Contract)
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    mc: MCConfig = field(default_factory=MCConfig)

    def model(self, kind: str) -> Model:
        if kind == "merton":
            return self.merton
        if kind == "gamma-tc":
            return self.gamma_tc
        raise ValueError(f"unknown model '{kind}'")

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp["merton"] = params_to_mapping(self.merton)
        cp["gamma-tc"] = params_to_mapping(self.gamma_tc)
        c = self.contract
        cp["contract"] = {"K": repr(c.K), "c": repr(c.c), "T": repr(c.T), "s0": f"{c.s0[0]!r} {c.s0[1]!r}"}
        s = self.scheme
        sch = {f.name: str(getattr(s, f.name)) for f in fields(s) if f.name not in ("quad", "M")}
        sch["M"] = "auto" if s.M is None else str(s.M)
        sch["radius_factor"] = repr(s.quad.radius_factor)
        sch["min_period"] = repr(s.quad.min_period)
        cp["scheme"] = sch
        cp["mc"] = {f.name: str(getattr(self.mc, f.name)) for f in fields(self.mc)}
        lines = []
        for sec in cp.sections():
            lines.append(f"[{sec}]")
            lines += [f"{k} = {v}" for k, v in cp[sec].items()]
            lines.append("")
        return "\n".join(lines)


def _typed(cls, section, skip=()):
    out = {}
    kinds = {f.name: f.type for f in fields(cls)}
    for k, v in section.items():
        if k in skip:
            continue
        if k not in kinds:
            raise KeyError(f"unknown key '{k}' in [{section.name}]")
        t = str(kinds[k])
        if "int" in t and "float" not in t:
            out[k] = None if v.strip().lower() in ("auto", "none", "") else int(v)
        elif "str" in t:
            out[k] = v.strip()
        else:
            out[k] = float(v)
    return out


def load_config(path: str | None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    if not cp.read(path):
        raise FileNotFoundError(path)
    if cp.has_section("merton"):
        cfg.merton = params_from_mapping("merton", dict(cp["merton"]))
    if cp.has_section("gamma-tc"):
        cfg.gamma_tc = params_from_mapping("gamma-tc", dict(cp["gamma-tc"]))
    if cp.has_section("contract"):
        sec = cp["contract"]
        kw = {k: float(v) for k, v in sec.items() if k != "s0"}
        if "s0" in sec:
            kw["s0"] = tuple(float(x) for x in sec["s0"].replace(",", " ").split())
        cfg.contract = Contract(**kw)
    if cp.has_section("scheme"):
        sec = cp["scheme"]
        quad_kw = {k: float(sec[k]) for k in ("radius_factor", "min_period") if k in sec}
        kw = _typed(SchemeConfig, sec, skip=("radius_factor", "min_period"))
        for k in ("N", "band", "maxit", "rannacher"):
            if k in kw and kw[k] is not None:
                kw[k] = int(kw[k])
        cfg.scheme = replace(cfg.scheme, **kw, quad=SymbolQuadConfig(**quad_kw))
    if cp.has_section("mc"):
        cfg.mc = MCConfig(**{k: int(float(v)) for k, v in cp["mc"].items()})
    return cfg
