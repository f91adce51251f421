"""Line-oriented fixture files for seeding and exporting reference data.

One record per line, fields separated by "|", first field names the record
kind. "#" starts a comment, blank lines are skipped, encoding is UTF-8.
Multi-valued fields (indications, substance codes, allergies) separate
entries with ";". Drugs reference diseases by name and rules reference
drugs by name, so files stay hand-editable and diffable.

    DISEASE|name|description
    DRUG|name|class|generic description|strength|indications|substances|adverse reactions
    RULE|drug a|drug b|severity|note
    PATIENT|full name|date of birth|sex|allergies
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date

from .domain import InteractionSeverity, Sex
from .errors import RxError


class FixtureParseError(RxError):
    code = "PARSE_ERROR"
    http_status = 422

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class FixtureReferenceError(RxError):
    code = "REFERENCE_ERROR"
    http_status = 422


@dataclass
class FixtureDisease:
    name: str
    description: str = ""


@dataclass
class FixtureDrug:
    name: str
    pharmaceutical_class: str = ""
    generic_description: str = ""
    strength: str = ""
    indications: list[str] = field(default_factory=list)
    substance_codes: list[str] = field(default_factory=list)
    adverse_reactions: str = ""


@dataclass
class FixtureRule:
    drug_a: str
    drug_b: str
    severity: InteractionSeverity = InteractionSeverity.MODERATE
    note: str = ""


@dataclass
class FixturePatient:
    full_name: str
    date_of_birth: date = date(1970, 1, 1)
    sex: Sex = Sex.OTHER
    allergies: list[str] = field(default_factory=list)


@dataclass
class Fixture:
    diseases: list[FixtureDisease] = field(default_factory=list)
    drugs: list[FixtureDrug] = field(default_factory=list)
    rules: list[FixtureRule] = field(default_factory=list)
    patients: list[FixturePatient] = field(default_factory=list)


def _split_multi(raw: str) -> list[str]:
    return [part.strip() for part in raw.split(";") if part.strip()]


def _fields(line_no: int, body: str, expected: int, kind: str) -> list[str]:
    parts = [p.strip() for p in body.split("|")]
    if len(parts) != expected:
        raise FixtureParseError(
            line_no, f"{kind} record needs {expected} fields, got {len(parts)}"
        )
    return parts


def parse_fixture(text: str) -> Fixture:
    fixture = Fixture()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        kind, _, body = line.partition("|")
        kind = kind.strip().upper()
        if kind == "DISEASE":
            name, description = _fields(line_no, body, 2, kind)
            if not name:
                raise FixtureParseError(line_no, "disease name must be nonempty")
            fixture.diseases.append(FixtureDisease(name=name, description=description))
        elif kind == "DRUG":
            name, klass, desc, strength, indications, substances, adverse = _fields(
                line_no, body, 7, kind
            )
            if not name:
                raise FixtureParseError(line_no, "drug name must be nonempty")
            fixture.drugs.append(
                FixtureDrug(
                    name=name,
                    pharmaceutical_class=klass,
                    generic_description=desc,
                    strength=strength,
                    indications=_split_multi(indications),
                    substance_codes=_split_multi(substances),
                    adverse_reactions=adverse,
                )
            )
        elif kind == "RULE":
            drug_a, drug_b, severity, note = _fields(line_no, body, 4, kind)
            try:
                sev = InteractionSeverity(severity.upper())
            except ValueError:
                raise FixtureParseError(line_no, f"unknown severity {severity!r}") from None
            fixture.rules.append(FixtureRule(drug_a=drug_a, drug_b=drug_b, severity=sev, note=note))
        elif kind == "PATIENT":
            full_name, dob, sex, allergies = _fields(line_no, body, 4, kind)
            try:
                born = date.fromisoformat(dob)
            except ValueError:
                raise FixtureParseError(line_no, f"bad date of birth {dob!r}") from None
            try:
                parsed_sex = Sex(sex.upper())
            except ValueError:
                raise FixtureParseError(line_no, f"unknown sex {sex!r}") from None
            fixture.patients.append(
                FixturePatient(
                    full_name=full_name,
                    date_of_birth=born,
                    sex=parsed_sex,
                    allergies=_split_multi(allergies),
                )
            )
        else:
            raise FixtureParseError(line_no, f"unknown record kind {kind!r}")
    return fixture


def render_fixture(fixture: Fixture) -> str:
    lines = ["# rxtropic fixture"]
    for d in fixture.diseases:
        lines.append(f"DISEASE|{d.name}|{d.description}")
    for g in fixture.drugs:
        lines.append(
            "DRUG|{name}|{klass}|{desc}|{strength}|{ind}|{subs}|{adverse}".format(
                name=g.name,
                klass=g.pharmaceutical_class,
                desc=g.generic_description,
                strength=g.strength,
                ind=";".join(g.indications),
                subs=";".join(g.substance_codes),
                adverse=g.adverse_reactions,
            )
        )
    for r in fixture.rules:
        lines.append(f"RULE|{r.drug_a}|{r.drug_b}|{r.severity.value}|{r.note}")
    for p in fixture.patients:
        lines.append(
            f"PATIENT|{p.full_name}|{p.date_of_birth.isoformat()}"
            f"|{p.sex.value}|{';'.join(p.allergies)}"
        )
    return "\n".join(lines) + "\n"


def fixture_from_store(view) -> Fixture:
    """Export the reference data as a fixture that re-parses to the same state."""
    diseases = view.list_diseases()
    disease_names = {d.id: d.name for d in diseases}
    drugs = view.list_drugs()
    drug_names = {d.id: d.name for d in drugs}
    fixture = Fixture(
        diseases=[FixtureDisease(name=d.name, description=d.description) for d in diseases],
        drugs=[
            FixtureDrug(
                name=d.name,
                pharmaceutical_class=d.pharmaceutical_class,
                generic_description=d.generic_description,
                strength=d.strength,
                indications=sorted(disease_names[i] for i in d.indications),
                substance_codes=sorted(d.substance_codes),
                adverse_reactions=d.adverse_reactions,
            )
            for d in drugs
        ],
        rules=[
            FixtureRule(
                drug_a=drug_names[r.pair_key[0]],
                drug_b=drug_names[r.pair_key[1]],
                severity=r.severity,
                note=r.note,
            )
            for r in view.list_rules()
        ],
        patients=[
            FixturePatient(
                full_name=p.full_name,
                date_of_birth=p.date_of_birth,
                sex=p.sex,
                allergies=sorted(p.allergies),
            )
            for p in view.list_patients()
        ],
    )
    return fixture
