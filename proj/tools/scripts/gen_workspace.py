#!/usr/bin/env python3
"""Regenerates the bundled workspace catalogs and site fixtures.

site_c mirrors site_a and site_d mirrors site_b: same patients and the same
logical values, stored under a graph schema and partly in other units. Values
that need a unit conversion are written as the exact double the C++ side
computes, so harmonized tables compare equal bit for bit.
"""

import json
import math
import random
import sys
from pathlib import Path

ONTO = "https://w3id.org/mila/onto#"
RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"

ROOT = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[2] / "workspace"

CONCEPTS = [
    # uri, label, category, unit dimension, parents, roles, values
    ("ClinicalEntity", "clinical entity", "observation", None, [], [], []),
    ("PatientAttribute", "patient attribute", "patient_attribute", None, ["ClinicalEntity"], [], []),
    ("Age", "age", "patient_attribute", "time", ["PatientAttribute"], ["predictor", "cohort_filter"], []),
    ("Sex", "sex", "patient_attribute", None, ["PatientAttribute"], ["predictor", "cohort_filter"], ["female", "male"]),
    ("PatientName", "patient name", "patient_attribute", None, ["PatientAttribute"], ["cohort_filter"], []),
    ("DiagnosisDate", "date of cancer diagnosis", "patient_attribute", None, ["PatientAttribute"], ["cohort_filter"], []),
    ("SmokingStatus", "smoking status", "patient_attribute", None, ["PatientAttribute"], ["predictor", "cohort_filter"],
     ["never", "former", "current"]),
    ("LabTest", "laboratory test", "lab_test", None, ["ClinicalEntity"], [], []),
    ("BloodGlucose", "blood glucose", "lab_test", "mass_concentration", ["LabTest"], ["predictor", "cohort_filter"], []),
    ("CReactiveProtein", "C-reactive protein", "lab_test", "mass_concentration", ["LabTest"], ["predictor"], []),
    ("NeutrophilCount", "neutrophil count", "lab_test", "count", ["LabTest"], ["predictor"], []),
    ("PDL1Expression", "PD-L1 tumour proportion score", "lab_test", "dimensionless", ["LabTest"], ["predictor"], []),
    ("TumorMarker", "tumour marker (CEA)", "lab_test", "mass_concentration", ["LabTest"], ["predictor"], []),
    ("Creatinine", "serum creatinine", "lab_test", "mass_concentration", ["LabTest"], ["predictor"], []),
    ("Hemoglobin", "haemoglobin", "lab_test", "mass_concentration", ["LabTest"], ["predictor"], []),
    ("Observation", "clinical observation", "observation", None, ["ClinicalEntity"], [], []),
    ("SystolicBloodPressure", "systolic blood pressure", "observation", "pressure", ["Observation"], ["predictor"], []),
    ("DiastolicBloodPressure", "diastolic blood pressure", "observation", "pressure", ["Observation"], ["predictor"], []),
    ("ECOGStatus", "ECOG performance status", "observation", None, ["Observation"], ["predictor", "cohort_filter"],
     ["0", "1", "2", "3", "4"]),
    ("Treatment", "treatment", "treatment", None, ["ClinicalEntity"], [], []),
    ("ImmuneCheckpointInhibitor", "immune checkpoint inhibitor", "treatment", None, ["Treatment"],
     ["predictor", "cohort_filter"], []),
    ("Corticosteroids", "systemic corticosteroids", "treatment", None, ["Treatment"], ["predictor"], []),
    ("Chemotherapy", "chemotherapy", "treatment", None, ["Treatment"], ["predictor"], []),
    ("TreatmentLine", "line of therapy", "treatment", None, ["Treatment"], ["predictor", "cohort_filter"],
     ["first", "second", "third_or_later"]),
    ("Condition", "condition", "condition", None, ["ClinicalEntity"], [], []),
    ("Hypertension", "hypertension", "condition", None, ["Condition"], ["outcome", "predictor"], []),
    ("Diabetes", "diabetes mellitus", "condition", None, ["Condition"], ["outcome", "predictor"], []),
    ("IrAEHistory", "history of immune-related adverse events", "condition", None, ["Condition"], ["predictor"], []),
    ("AdverseEvent", "adverse event", "adverse_event", None, ["ClinicalEntity"], [], []),
    ("ImmuneRelatedAdverseEvent", "immune-related adverse event", "adverse_event", None, ["AdverseEvent"], [], []),
    ("AECausality", "adverse event causality", "adverse_event", None, ["AdverseEvent"], ["outcome"],
     ["unrelated", "possible", "probable", "definite"]),
    ("TreatmentRelatedAE", "treatment-related adverse event", "adverse_event", None, ["ImmuneRelatedAdverseEvent"],
     ["outcome"], []),
    ("AdverseEventFamily", "adverse event family", "adverse_event", None, ["ImmuneRelatedAdverseEvent"], ["outcome"],
     ["endocrine", "gastrointestinal", "cutaneous", "pulmonary"]),
    ("OutcomeMeasure", "outcome measure", "outcome_measure", None, ["ClinicalEntity"], [], []),
    ("TreatmentResponse", "best overall response", "outcome_measure", None, ["OutcomeMeasure"], ["outcome"],
     ["complete_response", "partial_response", "stable_disease", "progressive_disease"]),
]

PREDICTOR_CATEGORIES = ["condition", "observation", "lab_test", "treatment", "adverse_event", "patient_attribute"]
RULES = {
    ("treatment_recommendation", "outcome_measure"): ["patient_attribute", "lab_test", "observation", "condition",
                                                      "treatment"],
    ("ae_causality", "adverse_event"): ["treatment", "lab_test", "observation", "patient_attribute", "condition"],
    ("treatment_ae_detection", "adverse_event"): ["treatment", "lab_test", "observation", "patient_attribute"],
    ("future_ae_family", "adverse_event"): ["condition", "lab_test", "patient_attribute", "treatment", "observation",
                                            "adverse_event"],
    ("generic_prediction", "condition"): ["patient_attribute", "observation", "condition"],
}
# Spelled out so the catalog documents them; anything unlisted is denied anyway.
EXPLICIT_DENIES = [
    ("generic_prediction", "condition", "lab_test"),
    ("generic_prediction", "condition", "adverse_event"),
    ("treatment_ae_detection", "adverse_event", "adverse_event"),
]

UNITS = [
    ("mg/dL", "mass_concentration"), ("mmol/L", "mass_concentration"), ("g/L", "mass_concentration"),
    ("mg/L", "mass_concentration"), ("ng/mL", "mass_concentration"), ("ug/L", "mass_concentration"),
    ("g/dL", "mass_concentration"), ("umol/L", "molar_concentration"), ("mm[Hg]", "pressure"),
    ("kPa", "pressure"), ("10*9/L", "count"), ("/uL", "count"), ("%", "dimensionless"), ("1", "dimensionless"),
    ("a", "time"), ("mo", "time"), ("d", "time"),
]
CONVERSIONS = [
    ("mmol/L", "mg/dL", 18.0, 0.0),  # glucose
    ("g/L", "mg/dL", 100.0, 0.0),
    ("mg/L", "mg/dL", 0.1, 0.0),
    ("ng/mL", "ug/L", 1.0, 0.0),
    ("g/dL", "g/L", 10.0, 0.0),
    ("kPa", "mm[Hg]", 7.50061683, 0.0),
    ("/uL", "10*9/L", 0.001, 0.0),
    ("1", "%", 100.0, 0.0),
    ("a", "mo", 12.0, 0.0),
    ("a", "d", 365.25, 0.0),
]


def catalog():
    concepts = []
    for uri, label, category, dim, parents, roles, values in CONCEPTS:
        c = {"uri": ONTO + uri, "label": label, "category": category, "parents": [ONTO + p for p in parents],
             "allowed_roles": roles}
        if dim:
            c["unit_dimension"] = dim
        if values:
            c["values"] = values
        concepts.append(c)
    rules = []
    for (task, outcome), predictors in RULES.items():
        for p in predictors:
            rules.append({"task_kind": task, "outcome_category": outcome, "predictor_category": p, "allowed": True})
    for task, outcome, p in EXPLICIT_DENIES:
        rules.append({"task_kind": task, "outcome_category": outcome, "predictor_category": p, "allowed": False})
    return {"version": "2024.1", "concepts": concepts, "role_rules": rules}


def units():
    return {"units": [{"code": c, "dimension": d} for c, d in UNITS],
            "conversions": [{"from": a, "to": b, "factor": f, "offset": o} for a, b, f, o in CONVERSIONS]}


def sigmoid(z):
    return 1.0 / (1.0 + math.exp(-z))


def patients(prefix, n, rng):
    """Logical patient records with loosely learnable outcomes."""
    out = []
    for i in range(1, n + 1):
        age = rng.randint(34, 84)
        ici = rng.random() < 0.6
        steroids = rng.random() < 0.3
        glucose_mmol = round(rng.uniform(3.9, 11.5), 1)
        pdl1 = float(rng.randint(0, 95))
        crp = round(rng.uniform(1.0, 120.0), 1)
        neut_ul = rng.randint(1500, 9500)
        sbp_kpa = round(rng.uniform(13.0, 22.0), 1)
        cea = round(rng.uniform(0.5, 45.0), 1)
        line = rng.choice(["first", "second", "third_or_later"])
        sex = rng.choice(["female", "male"])
        irae = rng.random() < 0.35
        year = rng.randint(2016, 2022)

        score = 0.04 * pdl1 - 0.35 * glucose_mmol + (1.2 if ici else -0.5) + rng.gauss(0, 0.8)
        response = ("complete_response" if score > 2.2 else "partial_response" if score > 0.8
                    else "stable_disease" if score > -0.6 else "progressive_disease")
        related_p = sigmoid(2.2 * ici - 1.0 + 0.0004 * (neut_ul - 5000) + 0.15 * (sbp_kpa - 17.0))
        related = rng.random() < related_p
        caus_score = 1.5 * ici + 0.8 * steroids + 0.02 * crp + rng.gauss(0, 0.7)
        causality = ("definite" if caus_score > 3.0 else "probable" if caus_score > 2.0
                     else "possible" if caus_score > 1.0 else "unrelated")
        fam_score = 0.05 * cea + (1.0 if irae else 0.0) + rng.gauss(0, 0.6)
        family = ("pulmonary" if fam_score > 2.2 else "gastrointestinal" if fam_score > 1.4
                  else "endocrine" if fam_score > 0.6 else "cutaneous")
        out.append({
            "id": f"{prefix}{i:03d}", "name": f"Patient {prefix}{i:03d}", "age": age, "sex": sex,
            "diagnosis_date": f"{year}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}",
            "glucose_mmol": glucose_mmol, "pdl1": pdl1, "crp": crp, "neut_ul": neut_ul, "sbp_kpa": sbp_kpa,
            "cea": cea, "ici": ici, "steroids": steroids, "line": line, "irae": irae, "response": response,
            "causality": causality, "related": related, "family": family,
        })
    return out


# Derived values, computed the way the C++ harmonizer applies a declared pair
# (forward: factor * x + offset, reverse: (x - offset) / factor).
def mg_dl(p):
    return 18.0 * p["glucose_mmol"] + 0.0


def mmhg(p):
    return 7.50061683 * p["sbp_kpa"] + 0.0


def neut_10e9(p):
    return 0.001 * p["neut_ul"] + 0.0


def relational_site(site_id, key, layout, rows, units_by_concept):
    """layout: table -> (key column, [(column, concept, datatype, accessor)])"""
    mappings, tables, counts = {}, {}, {}
    for table, (key_col, columns) in layout.items():
        tables[table] = {"columns": [key_col] + [c for c, _, _, _ in columns], "rows": []}
        for column, concept, datatype, _ in columns:
            m = {"table": table, "column": column, "datatype": datatype}
            if key_col != key:
                m["patient_key_column"] = key_col
            if concept in units_by_concept:
                m["unit"] = units_by_concept[concept]
            if concept == "PatientName":
                m["identifying"] = True
            mappings[ONTO + concept] = m
            counts[ONTO + concept] = len(rows)
        for p in rows:
            tables[table]["rows"].append([p["id"]] + [get(p) for _, _, _, get in columns])
    return {"site_id": site_id, "dialect": "sql", "patient_key": key, "mappings": mappings, "record_count": counts,
            "fixture": {"tables": tables}}


def graph_site(site_id, base, layout, rows, units_by_concept):
    """layout: class -> [(predicate, concept, datatype, kind, accessor)]"""
    key = base + "patientId"
    mappings, triples, counts = {}, [], {}
    for cls, columns in layout.items():
        for pred, concept, datatype, _, _ in columns:
            m = {"subject_class_uri": base + cls, "predicate_uri": base + pred, "datatype": datatype}
            if concept in units_by_concept:
                m["unit"] = units_by_concept[concept]
            if concept == "PatientName":
                m["identifying"] = True
            mappings[ONTO + concept] = m
            counts[ONTO + concept] = len(rows)
    for p in rows:
        for cls, columns in layout.items():
            subject = f"{base.rstrip('#')}/{cls.lower()}/{p['id']}"
            triples.append([subject, RDF_TYPE, base + cls, "iri"])
            triples.append([subject, key, p["id"], "string"])
            for pred, _, _, kind, get in columns:
                value = get(p)
                if kind == "boolean":
                    lexical = "true" if value else "false"
                elif kind == "decimal":
                    lexical = repr(float(value))
                else:
                    lexical = str(value)
                triples.append([subject, base + pred, lexical, kind])
    return {"site_id": site_id, "dialect": "sparql", "patient_key": key, "mappings": mappings,
            "record_count": counts, "fixture": {"triples": triples}}


def sites():
    rng = random.Random(20240611)
    group_a = patients("A", 44, rng)
    group_b = patients("B", 38, rng)

    site_a = relational_site("site_a", "patient_id", {
        "patients": ("patient_id", [
            ("full_name", "PatientName", "categorical", lambda p: p["name"]),
            ("age_years", "Age", "numeric", lambda p: float(p["age"])),
            ("sex", "Sex", "categorical", lambda p: p["sex"]),
            ("diagnosed_on", "DiagnosisDate", "datetime", lambda p: p["diagnosis_date"]),
        ]),
        "lab_results": ("patient_id", [
            ("glucose", "BloodGlucose", "numeric", mg_dl),
            ("pdl1_tps", "PDL1Expression", "numeric", lambda p: p["pdl1"]),
            ("crp", "CReactiveProtein", "numeric", lambda p: p["crp"]),
            ("neutrophils", "NeutrophilCount", "numeric", neut_10e9),
            ("cea", "TumorMarker", "numeric", lambda p: p["cea"]),
        ]),
        "therapies": ("patient_id", [
            ("checkpoint_inhibitor", "ImmuneCheckpointInhibitor", "boolean", lambda p: p["ici"]),
            ("corticosteroids", "Corticosteroids", "boolean", lambda p: p["steroids"]),
            ("line_of_therapy", "TreatmentLine", "categorical", lambda p: p["line"]),
        ]),
        "vitals": ("patient_id", [
            ("systolic", "SystolicBloodPressure", "numeric", mmhg),
        ]),
        "outcomes": ("patient_id", [
            ("best_response", "TreatmentResponse", "categorical", lambda p: p["response"]),
            ("ae_causality", "AECausality", "categorical", lambda p: p["causality"]),
            ("treatment_related_ae", "TreatmentRelatedAE", "boolean", lambda p: p["related"]),
            ("ae_family", "AdverseEventFamily", "categorical", lambda p: p["family"]),
            ("prior_irae", "IrAEHistory", "boolean", lambda p: p["irae"]),
        ]),
    }, group_a, {"Age": "a", "BloodGlucose": "mg/dL", "PDL1Expression": "%", "CReactiveProtein": "mg/L",
                 "NeutrophilCount": "10*9/L", "TumorMarker": "ng/mL", "SystolicBloodPressure": "mm[Hg]"})

    site_b = relational_site("site_b", "pid", {
        "person": ("pid", [
            ("age", "Age", "numeric", lambda p: float(p["age"])),
            ("gender", "Sex", "categorical", lambda p: p["sex"]),
            ("dx_date", "DiagnosisDate", "datetime", lambda p: p["diagnosis_date"]),
        ]),
        "measurement": ("subject_id", [
            ("glucose_mmol", "BloodGlucose", "numeric", lambda p: p["glucose_mmol"]),
            ("pdl1", "PDL1Expression", "numeric", lambda p: p["pdl1"]),
            ("crp_mg_l", "CReactiveProtein", "numeric", lambda p: p["crp"]),
            ("anc_per_ul", "NeutrophilCount", "numeric", lambda p: float(p["neut_ul"])),
            ("cea_ug_l", "TumorMarker", "numeric", lambda p: p["cea"]),
            ("sbp_kpa", "SystolicBloodPressure", "numeric", lambda p: p["sbp_kpa"]),
        ]),
        "drug_exposure": ("subject_id", [
            ("ici", "ImmuneCheckpointInhibitor", "boolean", lambda p: p["ici"]),
            ("steroid", "Corticosteroids", "boolean", lambda p: p["steroids"]),
            ("therapy_line", "TreatmentLine", "categorical", lambda p: p["line"]),
        ]),
        "episode": ("subject_id", [
            ("response", "TreatmentResponse", "categorical", lambda p: p["response"]),
            ("causality", "AECausality", "categorical", lambda p: p["causality"]),
            ("drug_related", "TreatmentRelatedAE", "boolean", lambda p: p["related"]),
            ("ae_family", "AdverseEventFamily", "categorical", lambda p: p["family"]),
            ("irae_before", "IrAEHistory", "boolean", lambda p: p["irae"]),
        ]),
    }, group_b, {"Age": "a", "BloodGlucose": "mmol/L", "PDL1Expression": "%", "CReactiveProtein": "mg/L",
                 "NeutrophilCount": "/uL", "TumorMarker": "ug/L", "SystolicBloodPressure": "kPa"})

    base_c = "https://site-c.example.org/ehr#"
    site_c = graph_site("site_c", base_c, {
        "Patient": [
            ("name", "PatientName", "categorical", "string", lambda p: p["name"]),
            ("ageYears", "Age", "numeric", "decimal", lambda p: float(p["age"])),
            ("sex", "Sex", "categorical", "string", lambda p: p["sex"]),
            ("diagnosisDate", "DiagnosisDate", "datetime", "string", lambda p: p["diagnosis_date"]),
        ],
        "LabPanel": [
            ("glucose", "BloodGlucose", "numeric", "decimal", lambda p: p["glucose_mmol"]),
            ("pdl1Score", "PDL1Expression", "numeric", "decimal", lambda p: p["pdl1"]),
            ("crp", "CReactiveProtein", "numeric", "decimal", lambda p: p["crp"]),
            ("neutrophils", "NeutrophilCount", "numeric", "decimal", neut_10e9),
            ("cea", "TumorMarker", "numeric", "decimal", lambda p: p["cea"]),
        ],
        "Therapy": [
            ("checkpointInhibitor", "ImmuneCheckpointInhibitor", "boolean", "boolean", lambda p: p["ici"]),
            ("corticosteroids", "Corticosteroids", "boolean", "boolean", lambda p: p["steroids"]),
            ("line", "TreatmentLine", "categorical", "string", lambda p: p["line"]),
        ],
        "VitalSign": [
            ("systolic", "SystolicBloodPressure", "numeric", "decimal", mmhg),
        ],
        "Outcome": [
            ("bestResponse", "TreatmentResponse", "categorical", "string", lambda p: p["response"]),
            ("aeCausality", "AECausality", "categorical", "string", lambda p: p["causality"]),
            ("treatmentRelated", "TreatmentRelatedAE", "boolean", "boolean", lambda p: p["related"]),
            ("aeFamily", "AdverseEventFamily", "categorical", "string", lambda p: p["family"]),
            ("priorIrae", "IrAEHistory", "boolean", "boolean", lambda p: p["irae"]),
        ],
    }, group_a, {"Age": "a", "BloodGlucose": "mmol/L", "PDL1Expression": "%", "CReactiveProtein": "mg/L",
                 "NeutrophilCount": "10*9/L", "TumorMarker": "ng/mL", "SystolicBloodPressure": "mm[Hg]"})

    base_d = "https://site-d.example.org/graph#"
    site_d = graph_site("site_d", base_d, {
        "Person": [
            ("ageMonths", "Age", "numeric", "decimal", lambda p: 12.0 * float(p["age"]) + 0.0),
            ("gender", "Sex", "categorical", "string", lambda p: p["sex"]),
            ("diagnosed", "DiagnosisDate", "datetime", "string", lambda p: p["diagnosis_date"]),
        ],
        "Measurement": [
            ("glucose", "BloodGlucose", "numeric", "decimal", mg_dl),
            ("tps", "PDL1Expression", "numeric", "decimal", lambda p: p["pdl1"]),
            ("crp", "CReactiveProtein", "numeric", "decimal", lambda p: p["crp"]),
            ("anc", "NeutrophilCount", "numeric", "decimal", neut_10e9),
            ("cea", "TumorMarker", "numeric", "decimal", lambda p: p["cea"]),
            ("sbp", "SystolicBloodPressure", "numeric", "decimal", mmhg),
        ],
        "DrugExposure": [
            ("ici", "ImmuneCheckpointInhibitor", "boolean", "boolean", lambda p: p["ici"]),
            ("steroid", "Corticosteroids", "boolean", "boolean", lambda p: p["steroids"]),
            ("line", "TreatmentLine", "categorical", "string", lambda p: p["line"]),
        ],
        "Episode": [
            ("response", "TreatmentResponse", "categorical", "string", lambda p: p["response"]),
            ("causality", "AECausality", "categorical", "string", lambda p: p["causality"]),
            ("drugRelated", "TreatmentRelatedAE", "boolean", "boolean", lambda p: p["related"]),
            ("family", "AdverseEventFamily", "categorical", "string", lambda p: p["family"]),
            ("priorIrae", "IrAEHistory", "boolean", "boolean", lambda p: p["irae"]),
        ],
    }, group_b, {"Age": "mo", "BloodGlucose": "mg/dL", "PDL1Expression": "%", "CReactiveProtein": "mg/L",
                 "NeutrophilCount": "10*9/L", "TumorMarker": "ng/mL", "SystolicBloodPressure": "mm[Hg]"})
    return [site_a, site_b, site_c, site_d]


def write(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


def main():
    write(ROOT / "ontology" / "catalog.json", catalog())
    write(ROOT / "ontology" / "units.json", units())
    for s in sites():
        write(ROOT / "sites" / f"{s['site_id']}.json", s)


if __name__ == "__main__":
    main()
