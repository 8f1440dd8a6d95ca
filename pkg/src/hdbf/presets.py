"""Named campaign configurations for the published size/power and bias tables.

Preset keys:

``table1:pP,nN[,size|power]``
    Model 1, group sizes ``(2m, 3m, 5m)`` with ``N = 10 m``; size uses
    ``theta = 0``, power ``theta = 0.005``.
``table2:pP,nN[,size|power]``
    Model 2 with ``N`` in ``{55, 110, 220}``; size uses ``a = 0``, power ``a = 0.2``.
``table3:thetaT,nA-B-C`` / ``table5:...``
    Model 1 at ``p = 400`` for the listed group sizes.
``table4:aA,nA-B-C`` / ``table6:...``
    Model 2 at ``p = 400``.
``table7:pP,nN``
    Trace-estimator bias study (see :func:`bias_preset`).

``reference`` holds the published rejection rates in the order
``(t1, t2, th)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError
from .sim import Model1Config, Model2Config, SimConfig
from .stats import ALL_METHODS

# (p, N) -> (size t1, t2, th, power t1, t2, th)
TABLE1 = {
    (50, 50): (0.0626, 0.0594, 0.0600, 0.0896, 0.0850, 0.0808),
    (50, 100): (0.0564, 0.0534, 0.0584, 0.0830, 0.0810, 0.0702),
    (50, 200): (0.0576, 0.0570, 0.0590, 0.0830, 0.0806, 0.0760),
    (100, 50): (0.0588, 0.0546, 0.0564, 0.1218, 0.1176, 0.0936),
    (100, 100): (0.0630, 0.0598, 0.0494, 0.1204, 0.1178, 0.1022),
    (100, 200): (0.0550, 0.0544, 0.0560, 0.1282, 0.1252, 0.1054),
    (200, 50): (0.0590, 0.0562, 0.0604, 0.2190, 0.2060, 0.1604),
    (200, 100): (0.0528, 0.0502, 0.0548, 0.2240, 0.2150, 0.1618),
    (200, 200): (0.0558, 0.0552, 0.0536, 0.2224, 0.2172, 0.1664),
    (400, 50): (0.0536, 0.0492, 0.0510, 0.4848, 0.4656, 0.3394),
    (400, 100): (0.0612, 0.0580, 0.0604, 0.4624, 0.4536, 0.3412),
    (400, 200): (0.0578, 0.0556, 0.0576, 0.4870, 0.4812, 0.3524),
    (800, 50): (0.0580, 0.0522, 0.0512, 0.9146, 0.9060, 0.7688),
    (800, 100): (0.0600, 0.0560, 0.0572, 0.9080, 0.9040, 0.7634),
    (800, 200): (0.0534, 0.0514, 0.0516, 0.9106, 0.9078, 0.7778),
    (1000, 50): (0.0552, 0.0488, 0.0478, 0.9766, 0.9732, 0.8940),
    (1000, 100): (0.0524, 0.0500, 0.0462, 0.9776, 0.9764, 0.8994),
    (1000, 200): (0.0550, 0.0532, 0.0534, 0.9752, 0.9746, 0.9060),
}

TABLE2 = {
    (50, 55): (0.0617, 0.0557, 0.0560, 0.1782, 0.1697, 0.1573),
    (50, 110): (0.0602, 0.0578, 0.0572, 0.2828, 0.2774, 0.2588),
    (50, 220): (0.0608, 0.0594, 0.0598, 0.5153, 0.5119, 0.4848),
    (100, 55): (0.0634, 0.0608, 0.0620, 0.2276, 0.2182, 0.2023),
    (100, 110): (0.0660, 0.0640, 0.0658, 0.4077, 0.4002, 0.3698),
    (100, 220): (0.0628, 0.0622, 0.0640, 0.7933, 0.7909, 0.7705),
    (200, 55): (0.0588, 0.0550, 0.0564, 0.2838, 0.2742, 0.2556),
    (200, 110): (0.0614, 0.0604, 0.0604, 0.5548, 0.5484, 0.5202),
    (200, 220): (0.0598, 0.0588, 0.0588, 0.8710, 0.8692, 0.8566),
    (400, 55): (0.0626, 0.0610, 0.0612, 0.3494, 0.3406, 0.3226),
    (400, 110): (0.0644, 0.0630, 0.0636, 0.6632, 0.6596, 0.6360),
    (400, 220): (0.0586, 0.0580, 0.0608, 0.9424, 0.9418, 0.9328),
    (800, 55): (0.0667, 0.0658, 0.0652, 0.4122, 0.4046, 0.3780),
    (800, 110): (0.0628, 0.0614, 0.0610, 0.7762, 0.7734, 0.7512),
    (800, 220): (0.0562, 0.0554, 0.0564, 0.9928, 0.9926, 0.9912),
    (1000, 55): (0.0574, 0.0564, 0.0554, 0.4592, 0.4516, 0.4236),
    (1000, 110): (0.0588, 0.0578, 0.0594, 0.8406, 0.8380, 0.8212),
    (1000, 220): (0.0566, 0.0558, 0.0571, 0.9952, 0.9952, 0.9950),
}

THETAS = (0.0, 0.002, 0.003, 0.004, 0.005, 0.006, 0.007, 0.008, 0.009)
AMPLITUDES = (0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30)

# signal value -> {sizes: (t1, t2, th)}
TABLE3 = {
    (10, 10, 80): (
        (0.0572, 0.0494, 0.0500), (0.0840, 0.0752, 0.0670), (0.1408, 0.1234, 0.0850),
        (0.2358, 0.2146, 0.1242), (0.3990, 0.3768, 0.1884), (0.6042, 0.5786, 0.2630),
        (0.8098, 0.7948, 0.4140), (0.9324, 0.9232, 0.5828), (0.9840, 0.9816, 0.7376),
    ),
    (15, 15, 70): (
        (0.0606, 0.0564, 0.0584), (0.0886, 0.0814, 0.0678), (0.1400, 0.1304, 0.0936),
        (0.2444, 0.2350, 0.1430), (0.4172, 0.3994, 0.2248), (0.6506, 0.6316, 0.3414),
        (0.8340, 0.8242, 0.5066), (0.9442, 0.9390, 0.6870), (0.9898, 0.9882, 0.8414),
    ),
}
TABLE4 = {
    (10, 10, 80): (
        (0.0620, 0.0560, 0.0546), (0.0844, 0.0756, 0.0690), (0.1794, 0.1640, 0.1314),
        (0.3424, 0.3254, 0.2600), (0.5314, 0.5110, 0.4190), (0.8102, 0.7954, 0.7182),
        (0.9276, 0.9178, 0.8710),
    ),
    (15, 15, 70): (
        (0.0546, 0.0508, 0.0516), (0.0816, 0.0774, 0.0732), (0.1540, 0.1468, 0.1380),
        (0.3812, 0.3718, 0.3456), (0.6314, 0.6188, 0.6086), (0.8066, 0.7996, 0.7902),
        (0.9646, 0.9626, 0.9552),
    ),
}
TABLE5 = {
    (10, 20, 70): (
        (0.0604, 0.0507, 0.0512), (0.0944, 0.0826, 0.0670), (0.1572, 0.1402, 0.0916),
        (0.2736, 0.2510, 0.1314), (0.4598, 0.4318, 0.2098), (0.6736, 0.6462, 0.3144),
        (0.8716, 0.8554, 0.4910), (0.9586, 0.9526, 0.6704), (0.9934, 0.9922, 0.8254),
    ),
    (10, 30, 60): (
        (0.0538, 0.0440, 0.0508), (0.0974, 0.0834, 0.0698), (0.1850, 0.1590, 0.1034),
        (0.3290, 0.2928, 0.1476), (0.5628, 0.5282, 0.2548), (0.7990, 0.7714, 0.4034),
        (0.9458, 0.9364, 0.5934), (0.9902, 0.9874, 0.7566), (0.9996, 0.9996, 0.9002),
    ),
}
TABLE6 = {
    (10, 20, 70): (
        (0.0554, 0.0526, 0.0516), (0.0836, 0.0792, 0.0762), (0.2226, 0.2164, 0.1928),
        (0.4210, 0.4136, 0.3666), (0.6726, 0.6672, 0.6236), (0.8964, 0.8926, 0.8660),
        (0.9754, 0.9746, 0.9638),
    ),
    (10, 30, 60): (
        (0.0608, 0.0588, 0.0568), (0.0954, 0.0942, 0.0876), (0.2160, 0.2132, 0.1820),
        (0.4394, 0.4352, 0.3818), (0.6872, 0.6816, 0.6288), (0.9110, 0.9082, 0.8804),
        (0.9822, 0.9814, 0.9740),
    ),
}

# (p, n1) -> (new mean, new sd, hb mean, hb sd); TABLE7_TRACE is the published tr(Sigma_1^2) column
TABLE7 = {
    (50, 10): (1.0807, 0.4031, 1.2045, 0.4650),
    (50, 40): (1.0850, 0.1575, 1.1211, 0.1682),
    (50, 70): (1.0852, 0.1147, 1.1059, 0.1194),
    (50, 100): (1.0849, 0.0958, 1.0998, 0.0986),
    (50, 130): (1.0858, 0.0853, 1.0974, 0.0872),
    (50, 160): (1.0828, 0.0738, 1.0921, 0.0751),
    (200, 10): (1.0836, 0.3212, 1.2058, 0.3316),
    (200, 40): (1.0854, 0.0955, 1.1220, 0.0986),
    (200, 70): (1.0847, 0.0640, 1.1056, 0.0653),
    (200, 100): (1.0839, 0.0519, 1.0987, 0.0530),
    (200, 130): (1.0852, 0.0440, 1.0967, 0.0445),
    (200, 160): (1.0837, 0.0390, 1.0931, 0.0394),
    (500, 10): (1.0773, 0.2930, 1.2029, 0.2947),
    (500, 40): (1.0861, 0.0747, 1.1220, 0.0756),
    (500, 70): (1.0832, 0.0482, 1.1040, 0.0482),
    (500, 100): (1.0837, 0.0366, 1.0987, 0.0367),
    (500, 130): (1.0841, 0.0311, 1.0955, 0.0313),
    (500, 160): (1.0840, 0.0272, 1.0932, 0.0273),
    (1000, 10): (1.0846, 0.2868, 1.2045, 0.2822),
    (1000, 40): (1.0843, 0.0675, 1.1209, 0.0673),
    (1000, 70): (1.0845, 0.0407, 1.1054, 0.0405),
    (1000, 100): (1.0843, 0.0312, 1.0991, 0.0309),
    (1000, 130): (1.0844, 0.0258, 1.0957, 0.0256),
    (1000, 160): (1.0840, 0.0217, 1.0933, 0.0215),
}
TABLE7_TRACE = {50: 25000.0, 200: 100900.0, 500: 252700.0, 1000: 505700.0}


@dataclass(frozen=True)
class Campaign:
    label: str
    config: SimConfig
    reference: tuple | None = None


@dataclass(frozen=True)
class BiasPreset:
    p: int
    n1: int
    reference: tuple
    published_trace: float


def case1_sizes(total: int) -> tuple[int, int, int]:
    """Split ``total`` in the ratio 2:3:5, rounding half to even when it is not a multiple of 10."""
    raw = np.array([0.2, 0.3, 0.5]) * total
    sizes = np.round(raw).astype(int)
    sizes[-1] += total - sizes.sum()
    return tuple(int(s) for s in sizes)


def _parse_fields(body: str) -> dict:
    out = {}
    for part in body.split(","):
        part = part.strip()
        m = re.fullmatch(r"(p|n|theta|a)=?([0-9.\-]+)", part)
        if m:
            out[m.group(1)] = m.group(2)
        elif part in ("size", "power"):
            out["which"] = part
        elif part:
            raise ConfigError(f"unrecognised preset field {part!r}")
    return out


def _sizes(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split("-"))
    except ValueError:
        raise ConfigError(f"bad group sizes {text!r}; expected e.g. 10-10-80") from None


def _lookup(table, key, name):
    if key not in table:
        raise ConfigError(f"{name} has no row {key}; available: {sorted(table)}")
    return table[key]


def preset(key: str, replications: int = 5000, seed: int = 0, alpha: float = 0.05) -> list[Campaign]:
    """Materialize the campaigns behind a preset key such as ``table1:p400,n100``."""
    try:
        table, body = key.split(":", 1)
    except ValueError:
        raise ConfigError(f"preset must look like 'tableN:...', got {key!r}") from None
    f = _parse_fields(body)
    common = dict(replications=replications, seed=seed, alpha=alpha, methods=ALL_METHODS)

    if table in ("table1", "table2"):
        try:
            p, total = int(f["p"]), int(f["n"])
        except KeyError:
            raise ConfigError(f"{table} presets need p and n, e.g. {table}:p400,n100") from None
        ref = _lookup(TABLE1 if table == "table1" else TABLE2, (p, total), table)
        sizes = case1_sizes(total)
        which = [f["which"]] if "which" in f else ["size", "power"]
        out = []
        for w in which:
            if table == "table1":
                model = Model1Config(p, sizes, theta=0.0 if w == "size" else 0.005)
            else:
                model = Model2Config(p, sizes, a=0.0 if w == "size" else 0.2, seed=seed)
            r = ref[:3] if w == "size" else ref[3:]
            out.append(Campaign(f"{key}:{w}" if "which" not in f else key, SimConfig(model, **common), r))
        return out

    if table in ("table3", "table4", "table5", "table6"):
        model1 = table in ("table3", "table5")
        signal_key = "theta" if model1 else "a"
        if signal_key not in f or "n" not in f:
            raise ConfigError(f"{table} presets need {signal_key} and n, e.g. {table}:{signal_key}0.005,n10-10-80")
        sizes = _sizes(f["n"])
        value = float(f[signal_key])
        grid = THETAS if model1 else AMPLITUDES
        matches = [i for i, g in enumerate(grid) if abs(g - value) < 1e-12]
        if not matches:
            raise ConfigError(f"{signal_key}={value} is not a row of {table}; rows: {grid}")
        tab = {"table3": TABLE3, "table4": TABLE4, "table5": TABLE5, "table6": TABLE6}[table]
        ref = _lookup(tab, sizes, table)[matches[0]]
        if model1:
            model = Model1Config(400, sizes, theta=value)
        else:
            model = Model2Config(400, sizes, a=value, seed=seed)
        return [Campaign(key, SimConfig(model, **common), ref)]

    if table == "table7":
        raise ConfigError("table7 is a bias-study preset; use bias_preset() or the 'bias' command")
    raise ConfigError(f"unknown preset table {table!r}")


def bias_preset(key: str) -> BiasPreset:
    """Parse ``table7:pP,nN``."""
    table, _, body = key.partition(":")
    if table != "table7":
        raise ConfigError(f"bias presets come from table7, got {key!r}")
    f = _parse_fields(body)
    try:
        p, n1 = int(f["p"]), int(f["n"])
    except KeyError:
        raise ConfigError("table7 presets need p and n, e.g. table7:p200,n40") from None
    return BiasPreset(p, n1, _lookup(TABLE7, (p, n1), "table7"), TABLE7_TRACE[p])
