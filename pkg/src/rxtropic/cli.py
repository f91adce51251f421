"""Operator tooling: bootstrap the first administrator, seed reference data,
and export the audit log or the current fixture state.

Exit codes: 0 success, 1 contract error (already bootstrapped, weak password,
parse or reference error, locked store), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources

from . import fixtures
from .auth import check_password_strength, hash_password
from .domain import (
    Disease,
    Drug,
    InteractionRule,
    Patient,
    PractitionerAccount,
    Role,
    new_id,
    normalize_code,
)
from .errors import AlreadyBootstrappedError, RxError
from .fixtures import Fixture, FixtureReferenceError
from .store import SYSTEM_ACTOR, Store, StoreLock


def default_fixture_text() -> str:
    return resources.files("rxtropic.data").joinpath("default_fixture.rx").read_text("utf-8")


def bootstrap_admin(store: Store, license_number: str, password: str, full_name: str = "Administrator") -> str:
    """Create the very first administrator; fails if one already exists."""
    if store.has_administrator():
        raise AlreadyBootstrappedError("an administrator account already exists")
    check_password_strength(password)
    account = PractitionerAccount(
        id=new_id(),
        full_name=full_name,
        role=Role.ADMINISTRATOR,
        license_number=license_number,
        password_digest=hash_password(password),
    )
    store.put_practitioner(account, actor_id=SYSTEM_ACTOR, detail={"event": "bootstrap"})
    return account.id


def seed_store(store: Store, fixture: Fixture) -> dict[str, int]:
    """Load reference data; upserts by natural key so re-seeding is a no-op.

    All references are resolved before anything is written, so a reference
    error leaves the store untouched.
    """
    disease_ids = {normalize_code(d.name): d.id for d in store.list_diseases()}
    for spec in fixture.diseases:
        disease_ids.setdefault(normalize_code(spec.name), new_id())

    drug_ids = {normalize_code(d.name): d.id for d in store.list_drugs()}
    for spec in fixture.drugs:
        drug_ids.setdefault(normalize_code(spec.name), new_id())

    for spec in fixture.drugs:
        for disease_name in spec.indications:
            if normalize_code(disease_name) not in disease_ids:
                raise FixtureReferenceError(
                    f"drug {spec.name!r} cites unknown disease {disease_name!r}"
                )
    for spec in fixture.rules:
        for drug_name in (spec.drug_a, spec.drug_b):
            if normalize_code(drug_name) not in drug_ids:
                raise FixtureReferenceError(
                    f"rule cites unknown drug {drug_name!r}"
                )
        if normalize_code(spec.drug_a) == normalize_code(spec.drug_b):
            raise FixtureReferenceError(
                f"rule pairs drug {spec.drug_a!r} with itself"
            )

    report = {"diseases": 0, "drugs": 0, "rules": 0, "patients": 0}

    for spec in fixture.diseases:
        existing = store.find_disease_by_name(spec.name)
        disease = Disease(
            id=existing.id if existing else disease_ids[normalize_code(spec.name)],
            name=spec.name,
            description=spec.description,
        )
        if store.put_disease(disease, actor_id=SYSTEM_ACTOR) == "created":
            report["diseases"] += 1

    for spec in fixture.drugs:
        existing = store.find_drug_by_name(spec.name)
        drug = Drug(
            id=existing.id if existing else drug_ids[normalize_code(spec.name)],
            name=spec.name,
            pharmaceutical_class=spec.pharmaceutical_class,
            generic_description=spec.generic_description,
            strength=spec.strength,
            indications=frozenset(disease_ids[normalize_code(n)] for n in spec.indications),
            substance_codes=frozenset(spec.substance_codes),
            adverse_reactions=spec.adverse_reactions,
            active=existing.active if existing else True,
        )
        if store.put_drug(drug, actor_id=SYSTEM_ACTOR) == "created":
            report["drugs"] += 1

    for spec in fixture.rules:
        rule = InteractionRule.of(
            drug_ids[normalize_code(spec.drug_a)],
            drug_ids[normalize_code(spec.drug_b)],
            spec.severity,
            spec.note,
        )
        if store.put_rule(rule, actor_id=SYSTEM_ACTOR) == "created":
            report["rules"] += 1

    known_patients = {
        (normalize_code(p.full_name), p.date_of_birth): p for p in store.list_patients()
    }
    for spec in fixture.patients:
        existing = known_patients.get((normalize_code(spec.full_name), spec.date_of_birth))
        patient = Patient(
            id=existing.id if existing else new_id(),
            full_name=spec.full_name,
            date_of_birth=spec.date_of_birth,
            sex=spec.sex,
            allergies=frozenset(spec.allergies),
            active=existing.active if existing else True,
        )
        if store.put_patient(patient, actor_id=SYSTEM_ACTOR) == "created":
            report["patients"] += 1

    return report


def export_audit(store: Store, output_path: str) -> int:
    """One JSON document per line, in seq order; deterministic."""
    entries = store.audit_scan()
    lines = [json.dumps(e.to_dict(), sort_keys=True) for e in entries]
    text = "\n".join(lines) + ("\n" if lines else "")
    if output_path == "-":
        sys.stdout.write(text)
    else:
        with open(output_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return len(entries)


def export_fixture(store: Store, output_path: str) -> None:
    text = fixtures.render_fixture(fixtures.fixture_from_store(store))
    if output_path == "-":
        sys.stdout.write(text)
    else:
        with open(output_path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rxtropic-admin", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    boot = sub.add_parser("bootstrap-admin", help="create the first administrator")
    boot.add_argument("--store", required=True, help="store path")
    boot.add_argument("--license", required=True, help="administrator license number")
    boot.add_argument("--password", required=True)
    boot.add_argument("--full-name", default="Administrator")

    seed = sub.add_parser("seed", help="load a reference-data fixture")
    seed.add_argument("--store", required=True)
    seed.add_argument("--fixture", help="fixture file; omit for the shipped default")

    audit = sub.add_parser("export-audit", help="dump the audit log as JSON lines")
    audit.add_argument("--store", required=True)
    audit.add_argument("--output", required=True, help="output path, or - for stdout")

    fix = sub.add_parser("export-fixture", help="dump reference data as a fixture file")
    fix.add_argument("--store", required=True)
    fix.add_argument("--output", required=True, help="output path, or - for stdout")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        with StoreLock(args.store):
            store = Store(args.store)
            try:
                if args.command == "bootstrap-admin":
                    account_id = bootstrap_admin(store, args.license, args.password, args.full_name)
                    print(f"administrator created: {account_id}")
                elif args.command == "seed":
                    if args.fixture:
                        with open(args.fixture, encoding="utf-8") as fh:
                            text = fh.read()
                    else:
                        text = default_fixture_text()
                    report = seed_store(store, fixtures.parse_fixture(text))
                    for kind in ("diseases", "drugs", "rules", "patients"):
                        print(f"{kind} created: {report[kind]}")
                elif args.command == "export-audit":
                    count = export_audit(store, args.output)
                    print(f"exported {count} audit entries", file=sys.stderr)
                elif args.command == "export-fixture":
                    export_fixture(store, args.output)
            finally:
                store.close()
    except RxError as exc:
        print(f"error: {exc.code}: {exc.message}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
