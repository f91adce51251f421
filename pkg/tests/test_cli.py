"""Operator CLI: bootstrap, seeding, exports, exit codes, store locking."""

import json
import os

import pytest

from rxtropic.cli import (
    bootstrap_admin,
    default_fixture_text,
    export_audit,
    main,
    seed_store,
)
from rxtropic.errors import AlreadyBootstrappedError, WeakPasswordError
from rxtropic.fixtures import (
    FixtureParseError,
    FixtureReferenceError,
    fixture_from_store,
    parse_fixture,
    render_fixture,
)
from rxtropic.store import Store, StoreLock


@pytest.fixture
def store_path(tmp_path):
    return str(tmp_path / "cli.db")


class TestBootstrap:
    def test_fresh_store_creates_admin_that_can_login(self, clinic):
        account_id = bootstrap_admin(clinic.store, "ADM-1", "admin-password-1")
        session = clinic.auth.login("ADM-1", "admin-password-1")
        assert session.account_id == account_id

    def test_second_bootstrap_fails(self, clinic):
        bootstrap_admin(clinic.store, "ADM-1", "admin-password-1")
        with pytest.raises(AlreadyBootstrappedError):
            bootstrap_admin(clinic.store, "ADM-2", "admin-password-2")

    def test_weak_password(self, clinic):
        with pytest.raises(WeakPasswordError):
            bootstrap_admin(clinic.store, "ADM-1", "tiny")


class TestFixtureFormat:
    def test_default_fixture_parses_with_three_diseases(self):
        fixture = parse_fixture(default_fixture_text())
        assert sorted(d.name for d in fixture.diseases) == [
            "Malaria", "Tuberculosis", "Typhoid",
        ]

    def test_comments_and_blanks_ignored(self):
        fixture = parse_fixture("# note\n\nDISEASE|Dengue|viral\n")
        assert fixture.diseases[0].name == "Dengue"

    def test_parse_errors_carry_line_numbers(self):
        with pytest.raises(FixtureParseError) as err:
            parse_fixture("DISEASE|Dengue|viral\nDRUG|only|two\n")
        assert err.value.line_no == 2
        with pytest.raises(FixtureParseError):
            parse_fixture("WHAT|is|this")
        with pytest.raises(FixtureParseError):
            parse_fixture("PATIENT|X|not-a-date|M|")
        with pytest.raises(FixtureParseError):
            parse_fixture("RULE|a|b|CATASTROPHIC|n")

    def test_render_parse_round_trip(self):
        fixture = parse_fixture(default_fixture_text())
        again = parse_fixture(render_fixture(fixture))
        assert again == fixture


class TestSeed:
    def test_seed_reports_counts(self, clinic):
        report = seed_store(clinic.store, parse_fixture(default_fixture_text()))
        assert report == {"diseases": 3, "drugs": 11, "rules": 4, "patients": 3}

    def test_seed_is_idempotent(self, clinic):
        seed_store(clinic.store, parse_fixture(default_fixture_text()))
        snapshot_before = {
            "diseases": clinic.store.list_diseases(),
            "drugs": clinic.store.list_drugs(),
            "rules": clinic.store.list_rules(),
            "patients": clinic.store.list_patients(),
        }
        report = seed_store(clinic.store, parse_fixture(default_fixture_text()))
        assert report == {"diseases": 0, "drugs": 0, "rules": 0, "patients": 0}
        snapshot_after = {
            "diseases": clinic.store.list_diseases(),
            "drugs": clinic.store.list_drugs(),
            "rules": clinic.store.list_rules(),
            "patients": clinic.store.list_patients(),
        }
        assert snapshot_before == snapshot_after

    def test_unknown_disease_reference_aborts_cleanly(self, clinic):
        text = "DRUG|Mystery|c|d|1mg|Dengue||none\n"
        with pytest.raises(FixtureReferenceError):
            seed_store(clinic.store, parse_fixture(text))
        assert clinic.store.list_drugs() == []

    def test_drug_may_reference_disease_already_in_store(self, clinic):
        clinic.add_disease("Dengue")
        text = "DRUG|Mystery|c|d|1mg|Dengue||none\n"
        report = seed_store(clinic.store, parse_fixture(text))
        assert report["drugs"] == 1

    def test_export_reimports_equivalently(self, clinic):
        seed_store(clinic.store, parse_fixture(default_fixture_text()))
        exported = render_fixture(fixture_from_store(clinic.store))
        report = seed_store(clinic.store, parse_fixture(exported))
        assert report == {"diseases": 0, "drugs": 0, "rules": 0, "patients": 0}


class TestExportAudit:
    def test_empty_store_empty_file(self, clinic, tmp_path):
        out = str(tmp_path / "audit.jsonl")
        assert export_audit(clinic.store, out) == 0
        assert open(out, encoding="utf-8").read() == ""

    def test_one_line_per_entry_in_order(self, clinic, tmp_path):
        for i in range(5):
            clinic.store.audit_append("a", f"act{i}", "thing", f"t{i}")
        out = str(tmp_path / "audit.jsonl")
        assert export_audit(clinic.store, out) == 5
        lines = open(out, encoding="utf-8").read().splitlines()
        assert len(lines) == 5
        assert [json.loads(l)["seq"] for l in lines] == [1, 2, 3, 4, 5]

    def test_export_twice_identical(self, clinic, tmp_path):
        clinic.store.audit_append("a", "act", "thing", "t")
        first, second = str(tmp_path / "a1"), str(tmp_path / "a2")
        export_audit(clinic.store, first)
        export_audit(clinic.store, second)
        assert open(first).read() == open(second).read()


class TestMainEntrypoint:
    def test_bootstrap_then_seed_then_export(self, store_path, tmp_path, capsys):
        assert main(["bootstrap-admin", "--store", store_path,
                     "--license", "ADM-1", "--password", "admin-password-1"]) == 0
        assert "administrator created" in capsys.readouterr().out

        assert main(["seed", "--store", store_path]) == 0
        out = capsys.readouterr().out
        assert "diseases created: 3" in out

        audit_path = str(tmp_path / "audit.jsonl")
        assert main(["export-audit", "--store", store_path, "--output", audit_path]) == 0
        assert os.path.getsize(audit_path) > 0

        fixture_path = str(tmp_path / "export.rx")
        assert main(["export-fixture", "--store", store_path, "--output", fixture_path]) == 0
        assert "DISEASE|Malaria" in open(fixture_path, encoding="utf-8").read()

    def test_contract_errors_exit_1(self, store_path, capsys):
        assert main(["bootstrap-admin", "--store", store_path,
                     "--license", "ADM-1", "--password", "admin-password-1"]) == 0
        assert main(["bootstrap-admin", "--store", store_path,
                     "--license", "ADM-2", "--password", "admin-password-2"]) == 1
        assert "ALREADY_BOOTSTRAPPED" in capsys.readouterr().err

        assert main(["bootstrap-admin", "--store", store_path + "2",
                     "--license", "A", "--password", "pw"]) == 1

    def test_parse_error_exit_1_with_line(self, store_path, tmp_path, capsys):
        bad = tmp_path / "bad.rx"
        bad.write_text("DISEASE|okay|fine\nDRUG|broken\n", encoding="utf-8")
        assert main(["seed", "--store", store_path, "--fixture", str(bad)]) == 1
        assert "line 2" in capsys.readouterr().err

    def test_usage_error_exits_2(self, store_path):
        with pytest.raises(SystemExit) as err:
            main(["seed"])  # missing --store
        assert err.value.code == 2

    def test_refuses_locked_store(self, store_path, capsys):
        with StoreLock(store_path):
            assert main(["seed", "--store", store_path]) == 1
        assert "STORE_LOCKED" in capsys.readouterr().err
