"""Deterministic report serialization.

Reports carry the fully resolved run configuration, one or more index/value
tables, and a verdict map.  Values are serialized as decimal strings at the
full working precision (they routinely exceed binary-float range), keys are
sorted, and no volatile data (timestamps, paths, hostnames) is embedded, so
identical runs produce byte-identical files.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional

from mpmath import mp, mpf

from .numerics import PrecisionContext

VERSION = "0.1.0"


@dataclass
class RunConfig:
    family: Optional[str] = None
    N: Optional[int] = None
    K: Optional[int] = None
    bits: int = 512
    eps_tail: Optional[str] = None
    exact: bool = False
    out: Optional[str] = None
    format: str = "json"
    extra: Dict[str, object] = field(default_factory=dict)

    def context(self) -> PrecisionContext:
        eps = None if self.eps_tail is None else mpf(self.eps_tail)
        return PrecisionContext(bits=self.bits, eps_tail=eps)

    def as_dict(self) -> Dict[str, object]:
        d = {
            "family": self.family, "N": self.N, "K": self.K,
            "bits": self.bits,
            "eps_tail": self.eps_tail, "exact": self.exact,
            "format": self.format,
        }
        d.update({f"x_{k}": _plain(v) for k, v in sorted(self.extra.items())})
        return d


def _plain(v):
    if isinstance(v, (mpf, Fraction)):
        return decimal_str(v, 64)
    return v


def decimal_str(x, bits: int) -> str:
    """Decimal string carrying the full precision of ``x``."""
    if x is None:
        return ""
    if isinstance(x, Fraction):
        with mp.workprec(bits + 16):
            x = mpf(x.numerator) / mpf(x.denominator)
    elif not isinstance(x, mpf):
        with mp.workprec(bits + 16):
            x = mpf(x)
    dps = int(bits * 0.30103) + 3
    with mp.workprec(bits + 16):
        return mp.nstr(x, dps, strip_zeros=True)


@dataclass
class Report:
    config: RunConfig
    tables: Dict[str, List[dict]] = field(default_factory=dict)
    verdicts: Dict[str, object] = field(default_factory=dict)

    def add_table(self, name: str, values, errs=None, start: int = 0):
        rows = []
        for i, v in enumerate(values):
            err = None if errs is None else errs[i]
            rows.append({
                "index": start + i,
                "value": decimal_str(v, self.config.bits),
                "err": "" if err is None else decimal_str(err, 64),
            })
        self.tables[name] = rows

    def add_verdict(self, name: str, value):
        if isinstance(value, (mpf, Fraction)):
            value = decimal_str(value, self.config.bits)
        self.verdicts[name] = value

    def to_json(self) -> str:
        payload = {
            "config": self.config.as_dict(),
            "tables": self.tables,
            "verdicts": self.verdicts,
            "version": VERSION,
        }
        return json.dumps(payload, sort_keys=True, indent=1,
                          separators=(",", ": ")) + "\n"

    def write(self) -> List[str]:
        """Write per the config; returns the paths written (stdout when no
        output path is configured)."""
        out = self.config.out
        if self.config.format == "json":
            text = self.to_json()
            if out is None:
                print(text, end="")
                return []
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(text)
            return [out]
        # csv: one table per file
        paths = []
        base = out if out is not None else "report"
        if base.endswith(".csv"):
            base = base[:-4]
        for name in sorted(self.tables):
            path = f"{base}_{name}.csv"
            lines = ["index,value,err"]
            for row in self.tables[name]:
                lines.append(f"{row['index']},{row['value']},{row['err']}")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("\n".join(lines) + "\n")
            paths.append(path)
        vpath = f"{base}_verdicts.json"
        with open(vpath, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"config": self.config.as_dict(),
                                 "verdicts": self.verdicts,
                                 "version": VERSION},
                                sort_keys=True, indent=1) + "\n")
        paths.append(vpath)
        return paths
