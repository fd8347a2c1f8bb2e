"""Medication catalog, dose decay and the mapping from drug effect to chain dynamics."""

from __future__ import annotations

import csv
import hashlib
import io
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

CONDITIONS = ("depression", "anxiety", "insomnia")

CATALOG_HEADER = [
    "name",
    "onset",
    "response_rate",
    "conditions",
    "effect_depression",
    "effect_anxiety",
    "effect_insomnia",
    "effect_std",
    "half_life_days",
]

DEFAULT_HALF_LIFE_DAYS = 7.0
MIN_DOSAGE, MAX_DOSAGE = 0.5, 2.0
#: Doses below this concentration no longer contribute to pressure.
NEGLIGIBLE_CONCENTRATION = 1e-6

_DAYS_PER_UNIT = {"day": 1, "week": 7, "month": 30}


class CatalogError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: str | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class OnsetParseError(ValueError):
    pass


class ResponseRateParseError(ValueError):
    pass


@dataclass(frozen=True)
class Medication:
    name: str
    onset_text: str
    onset_range: tuple[int, int]
    response_text: str
    response_rate_range: tuple[float, float]
    conditions: str
    effect_mean: tuple[float, float, float]
    effect_std: tuple[float, float, float]
    half_life: float = DEFAULT_HALF_LIFE_DAYS
    time_to_effect: int | None = None

    def __post_init__(self):
        if self.time_to_effect is None:
            lo, hi = self.onset_range
            object.__setattr__(self, "time_to_effect", (lo + hi) // 2)
        problems = []
        if not self.half_life > 0:
            problems.append(f"half_life must be > 0, got {self.half_life}")
        if self.time_to_effect < 0:
            problems.append(f"time_to_effect must be >= 0, got {self.time_to_effect}")
        lo, hi = self.onset_range
        if lo > hi:
            problems.append(f"onset range {self.onset_range} is reversed")
        lo, hi = self.response_rate_range
        if not 0.0 <= lo <= hi <= 1.0:
            problems.append(f"response rate range {self.response_rate_range} not within [0, 1]")
        for c, m, s in zip(CONDITIONS, self.effect_mean, self.effect_std):
            if not -1.0 <= m <= 1.0:
                problems.append(f"effect on {c} must be in [-1, 1], got {m}")
            if s < 0:
                problems.append(f"effect std on {c} must be >= 0, got {s}")
        if problems:
            raise ValueError(f"{self.name}: " + "; ".join(problems))

    @property
    def is_inert(self) -> bool:
        return all(m == 0.0 for m in self.effect_mean) and all(s == 0.0 for s in self.effect_std)


@dataclass(frozen=True)
class ActiveDose:
    medication: Medication
    start_day: int
    dosage: float = 1.0

    def __post_init__(self):
        if not self.dosage > 0:
            raise ValueError(f"dosage must be > 0, got {self.dosage}")


def administer(medication: Medication, day: int, dosage: float = 1.0) -> ActiveDose:
    """Create a dose, enforcing the safe dosage window."""
    if not MIN_DOSAGE <= dosage <= MAX_DOSAGE:
        raise ValueError(f"dosage {dosage} outside safe range [{MIN_DOSAGE}, {MAX_DOSAGE}]")
    return ActiveDose(medication, int(day), float(dosage))


class MedicationCatalog:
    """Ordered, name-unique collection of medications."""

    def __init__(self, medications):
        self.medications = tuple(medications)
        seen = set()
        for med in self.medications:
            if med.name in seen:
                raise CatalogError(f"duplicate medication name {med.name!r}")
            seen.add(med.name)
        self._by_name = {m.name: m for m in self.medications}

    def __len__(self):
        return len(self.medications)

    def __iter__(self):
        return iter(self.medications)

    def __getitem__(self, key):
        if isinstance(key, str):
            return self._by_name[key]
        return self.medications[key]

    def __eq__(self, other):
        return isinstance(other, MedicationCatalog) and self.medications == other.medications

    @property
    def names(self) -> list[str]:
        return [m.name for m in self.medications]

    def sha256(self) -> str:
        return hashlib.sha256(serialize_catalog(self).encode("utf-8")).hexdigest()


# -- pharmacokinetics --------------------------------------------------------

def _elapsed(dose: ActiveDose, day: int) -> int:
    elapsed = day - dose.start_day
    if elapsed < 0:
        raise ValueError(f"day {day} precedes dose start day {dose.start_day}")
    return elapsed


def concentration(dose: ActiveDose, day: int) -> float:
    elapsed = _elapsed(dose, day)
    return dose.dosage * 0.5 ** (elapsed / dose.medication.half_life)


def effective_concentration(dose: ActiveDose, day: int) -> float:
    """Concentration, or 0 before the medication's onset."""
    elapsed = _elapsed(dose, day)
    if elapsed < dose.medication.time_to_effect:
        return 0.0
    return dose.dosage * 0.5 ** (elapsed / dose.medication.half_life)


def _condition_index(condition) -> int:
    if isinstance(condition, str):
        return CONDITIONS.index(condition)
    return int(condition)


def net_pressure(doses, condition, day: int, rng: np.random.Generator) -> float:
    """Signed medication pressure on one condition, clamped to [-1, 1].

    Each dose contributes ``effective_concentration * Normal(mean, std**2)``.
    One normal is drawn per dose, whether or not the dose is still active.
    """
    c = _condition_index(condition)
    doses = list(doses)
    z = rng.standard_normal(len(doses)) if doses else ()
    total = 0.0
    for dose, zk in zip(doses, z):
        ec = effective_concentration(dose, day)
        if ec < NEGLIGIBLE_CONCENTRATION:
            continue
        med = dose.medication
        total += ec * (med.effect_mean[c] + med.effect_std[c] * float(zk))
    return min(1.0, max(-1.0, total))


def pressure_target(i: int, n_states: int, p: float) -> int:
    """0-based state that receives shifted mass from row ``i``."""
    if p > 0:
        return max(i - 1, 0)
    if p < 0:
        return min(i + 1, n_states - 1)
    return i


def apply_pressure(transition, p: float) -> np.ndarray:
    """Shift fraction ``|p|`` of every row onto its improvement-direction neighbour.

    ``p > 0`` moves mass toward lower severity, ``p < 0`` toward higher; boundary
    rows shift onto themselves.  Output rows stay stochastic.
    """
    if not -1.0 <= p <= 1.0:
        raise ValueError(f"pressure {p} outside [-1, 1]")
    T = np.asarray(transition, dtype=float)
    n = T.shape[0]
    a = abs(p)
    out = (1.0 - a) * T
    for i in range(n):
        out[i, pressure_target(i, n, p)] += a
    return out


# -- catalog text grammar ------------------------------------------------------

_UNIT = r"(day|week|month)s?\b"
_ONSET_RANGE = re.compile(r"^(\d+)\s*-\s*(\d+)\s*" + _UNIT)
_ONSET_POINT = re.compile(r"^(\d+)\s*" + _UNIT)
_ONSET_WITHIN = re.compile(r"^within\s+(\d+)\s*" + _UNIT)


def parse_onset(text: str) -> tuple[int, int]:
    """Onset phrase to an inclusive ``(min_days, max_days)`` range.

    Only the leading clause is read, so ``"1-2 weeks to start working, 4-6
    weeks for full benefit"`` gives the start-working range.
    """
    s = " ".join(str(text).strip().lower().split())
    if not s:
        raise OnsetParseError("empty onset text")
    if s.startswith("first few days"):
        return (1, 3)
    m = _ONSET_WITHIN.match(s)
    if m:
        return (1, int(m.group(1)) * _DAYS_PER_UNIT[m.group(2)])
    m = _ONSET_RANGE.match(s)
    if m:
        k = _DAYS_PER_UNIT[m.group(3)]
        lo, hi = int(m.group(1)) * k, int(m.group(2)) * k
        if lo > hi:
            raise OnsetParseError(f"reversed onset range in {text!r}")
        return (lo, hi)
    m = _ONSET_POINT.match(s)
    if m:
        d = int(m.group(1)) * _DAYS_PER_UNIT[m.group(2)]
        return (d, d)
    raise OnsetParseError(f"unrecognized onset {text!r}")


_NUM = r"(\d+(?:\.\d+)?)"
_RATE_RANGE = re.compile(_NUM + r"\s*%?\s*-\s*" + _NUM + r"\s*%")
_RATE_POINT = re.compile(_NUM + r"\s*%")
_PARENS = re.compile(r"\([^)]*\)")


def _first_rate(s: str):
    found = []
    m = _RATE_RANGE.search(s)
    if m:
        found.append((m.start(), 0, float(m.group(1)), float(m.group(2))))
    m = _RATE_POINT.search(s)
    if m:
        found.append((m.start(), 1, float(m.group(1)), float(m.group(1))))
    return min(found) if found else None


def parse_response_rate(text: str) -> tuple[float, float]:
    """First percentage (or percentage range) in ``text`` as fractions.

    Parenthetical qualifiers are skipped unless the only percentage lives there.
    """
    s = str(text).strip()
    if not s:
        raise ResponseRateParseError("empty response rate text")
    hit = _first_rate(_PARENS.sub(" ", s)) or _first_rate(s)
    if hit is None:
        raise ResponseRateParseError(f"unrecognized response rate {text!r}")
    _, _, lo, hi = hit
    if not 0.0 <= lo <= hi <= 100.0:
        raise ResponseRateParseError(f"response rate out of range in {text!r}")
    return (round(lo / 100.0, 12), round(hi / 100.0, 12))


def treated_conditions(conditions_text: str) -> tuple[bool, bool, bool]:
    """Which of depression/anxiety/insomnia a free-text indication covers."""
    s = conditions_text.lower()
    return ("depress" in s, "anxiety" in s or "panic" in s, "insomnia" in s or "sleep" in s)


def derive_effects(response_rate_range, conditions_text: str):
    """Heuristic effect sizes from the catalog response rates.

    Half the response-rate midpoint on each treated condition, zero elsewhere;
    the spread is a tenth of the largest effect.
    """
    mid = 0.5 * (response_rate_range[0] + response_rate_range[1])
    means = tuple(round(0.5 * mid, 6) if t else 0.0 for t in treated_conditions(conditions_text))
    return means, round(0.1 * max(means), 6)


# -- CSV I/O -----------------------------------------------------------------

def _float_field(row: dict, column: str, line: int) -> float:
    raw = row.get(column)
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise CatalogError(f"expected a number, got {raw!r}", line, column) from None
    if not math.isfinite(value):
        raise CatalogError(f"non-finite value {raw!r}", line, column)
    return value


def parse_catalog(text: str) -> MedicationCatalog:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise CatalogError("empty catalog file: no data rows") from None
    header = [h.strip() for h in header]
    if header != CATALOG_HEADER:
        raise CatalogError(f"header must be {','.join(CATALOG_HEADER)}; got {','.join(header)}", 1)
    meds = []
    seen: dict[str, int] = {}
    for raw in reader:
        line = reader.line_num
        if not raw or all(not f.strip() for f in raw):
            continue
        if len(raw) != len(CATALOG_HEADER):
            raise CatalogError(f"expected {len(CATALOG_HEADER)} fields, got {len(raw)}", line)
        row = dict(zip(CATALOG_HEADER, (f.strip() for f in raw)))
        name = row["name"]
        if not name:
            raise CatalogError("empty medication name", line, "name")
        if name in seen:
            raise CatalogError(f"duplicate medication name {name!r} (first on line {seen[name]})", line, "name")
        seen[name] = line
        try:
            try:
                onset = parse_onset(row["onset"])
            except OnsetParseError as exc:
                raise CatalogError(str(exc), line, "onset") from None
            try:
                rate = parse_response_rate(row["response_rate"])
            except ResponseRateParseError as exc:
                raise CatalogError(str(exc), line, "response_rate") from None
            effects = tuple(_float_field(row, f"effect_{c}", line) for c in CONDITIONS)
            for c, e in zip(CONDITIONS, effects):
                if not -1.0 <= e <= 1.0:
                    raise CatalogError(f"effect must be in [-1, 1], got {e}", line, f"effect_{c}")
            std = _float_field(row, "effect_std", line)
            if std < 0:
                raise CatalogError(f"effect_std must be >= 0, got {std}", line, "effect_std")
            half_life = _float_field(row, "half_life_days", line)
            if not half_life > 0:
                raise CatalogError(f"half_life_days must be > 0, got {half_life}", line, "half_life_days")
        except CatalogError as exc:
            raise CatalogError(f"{name}: {exc.message}", exc.line, exc.column) from None
        meds.append(
            Medication(
                name=name,
                onset_text=row["onset"],
                onset_range=onset,
                response_text=row["response_rate"],
                response_rate_range=rate,
                conditions=row["conditions"],
                effect_mean=effects,
                effect_std=(std, std, std),
                half_life=half_life,
            )
        )
    if not meds:
        raise CatalogError("no data rows")
    return MedicationCatalog(meds)


def serialize_catalog(catalog: MedicationCatalog) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CATALOG_HEADER)
    for m in catalog:
        if len(set(m.effect_std)) != 1:
            raise ValueError(f"{m.name}: CSV schema holds one effect_std for all conditions")
        writer.writerow(
            [m.name, m.onset_text, m.response_text, m.conditions]
            + [repr(float(e)) for e in m.effect_mean]
            + [repr(float(m.effect_std[0])), repr(float(m.half_life))]
        )
    return buf.getvalue()


def read_catalog(path) -> MedicationCatalog:
    path = Path(path)
    return parse_catalog(path.read_text(encoding="utf-8"))


def default_catalog_text() -> str:
    return resources.files("fluentrx").joinpath("data/medications.csv").read_text(encoding="utf-8")


def load_default_catalog() -> MedicationCatalog:
    return parse_catalog(default_catalog_text())
