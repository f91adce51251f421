"""Brute-force reference for the screening rules, plus a randomized case
generator.

Deliberately naive and structurally independent of the engine: linear scans
over a rule list, nested loops over every pair, no shared helpers. Findings
are compared as multisets of (kind, severity, subject drug ids).
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

from rxtropic.domain import (
    Disease,
    Drug,
    InteractionRule,
    InteractionSeverity,
    PrescriptionItem,
    new_id,
)

NOW = datetime(2026, 2, 1, 12, 0, 0, tzinfo=timezone.utc)
WINDOW_DAYS = 30


def _norm(text: str) -> str:
    return " ".join(text.lower().split())


def _substances_of(drug: Drug) -> set[str]:
    out = {_norm(drug.name)}
    for code in drug.substance_codes:
        out.add(_norm(code))
    return out


def brute_force_findings(
    items: list[PrescriptionItem],
    allergies: set[str],
    active_medications: set[str],
    rule_list: list[InteractionRule],
    drugs_by_id: dict[str, Drug],
    diagnosis_id: str,
    history: list[tuple[str, datetime]],
    now: datetime = NOW,
    window_days: int = WINDOW_DAYS,
) -> Counter:
    found: list[tuple[str, str, frozenset]] = []

    for item in items:
        drug = drugs_by_id[item.drug_id]
        hit = False
        for allergy in allergies:
            if _norm(allergy) in _substances_of(drug):
                hit = True
        if hit:
            found.append(("ALLERGY", "BLOCK", frozenset({item.drug_id})))

    item_ids = [i.drug_id for i in items]
    pool = sorted(set(item_ids) | set(active_medications))
    for i in range(len(pool)):
        for j in range(i + 1, len(pool)):
            a, b = pool[i], pool[j]
            if a not in item_ids and b not in item_ids:
                continue
            for rule in rule_list:
                if rule.drug_pair == frozenset({a, b}):
                    found.append(("INTERACTION", "WARN", frozenset({a, b})))

    for item in items:
        drug = drugs_by_id[item.drug_id]
        if diagnosis_id not in drug.indications:
            found.append(("INDICATION", "WARN", frozenset({item.drug_id})))

    cutoff = now - timedelta(days=window_days)
    for item in items:
        seen = False
        for drug_id, sent_at in history:
            if drug_id == item.drug_id and sent_at >= cutoff:
                seen = True
        if seen:
            found.append(("DUPLICATE", "WARN", frozenset({item.drug_id})))

    return Counter(found)


def finding_multiset(findings) -> Counter:
    return Counter(
        (f.kind.value, f.severity.value, f.subject_drug_ids) for f in findings
    )


@dataclass
class RandomCase:
    diseases: dict[str, Disease]
    drugs: dict[str, Drug]
    rule_list: list[InteractionRule]
    allergies: set[str]
    active_medications: set[str]
    history: list[tuple[str, datetime]]
    items: list[PrescriptionItem]
    diagnosis_id: str


def random_case(rng: random.Random, max_drugs: int = 50) -> RandomCase:
    substance_pool = [f"sub-{i}" for i in range(12)]

    diseases = {}
    for i in range(rng.randint(1, 5)):
        d = Disease(id=new_id(), name=f"condition {i}")
        diseases[d.id] = d
    disease_ids = list(diseases)

    drugs = {}
    for i in range(rng.randint(1, max_drugs)):
        indications = frozenset(
            rng.sample(disease_ids, rng.randint(0, min(2, len(disease_ids))))
        )
        substances = frozenset(rng.sample(substance_pool, rng.randint(0, 3)))
        g = Drug(id=new_id(), name=f"compound {i}", indications=indications,
                 substance_codes=substances)
        drugs[g.id] = g
    drug_ids = list(drugs)

    rule_list = []
    if len(drug_ids) >= 2:
        all_pairs = [
            (drug_ids[i], drug_ids[j])
            for i in range(len(drug_ids))
            for j in range(i + 1, len(drug_ids))
        ]
        for a, b in rng.sample(all_pairs, min(len(all_pairs), rng.randint(0, 40))):
            severity = rng.choice(list(InteractionSeverity))
            rule_list.append(InteractionRule.of(a, b, severity, "generated"))

    allergies = set(rng.sample(substance_pool, rng.randint(0, 10)))
    if rng.random() < 0.3:
        allergies.add(drugs[rng.choice(drug_ids)].name)

    active_medications = set(rng.sample(drug_ids, rng.randint(0, min(8, len(drug_ids)))))

    history = []
    for _ in range(rng.randint(0, 20)):
        history.append(
            (rng.choice(drug_ids), NOW - timedelta(days=rng.uniform(0, 60)))
        )

    items = [
        PrescriptionItem(
            drug_id=drug_id, dose="1", frequency="od",
            duration_days=rng.randint(1, 30), instructions="",
        )
        for drug_id in rng.sample(drug_ids, rng.randint(1, min(8, len(drug_ids))))
    ]

    return RandomCase(
        diseases=diseases,
        drugs=drugs,
        rule_list=rule_list,
        allergies=allergies,
        active_medications=active_medications,
        history=history,
        items=items,
        diagnosis_id=rng.choice(disease_ids),
    )
