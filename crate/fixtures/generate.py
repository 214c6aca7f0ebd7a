"""Regenerates the JSON/JSONL fixtures in this directory.

Run from the repository root: python3 fixtures/generate.py
Output is deterministic.
"""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent
rng = random.Random(20240611)


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for r in rows:
            f.write(json.dumps(r, sort_keys=True) + "\n")


def spread(n, width):
    """n offsets summing to zero, symmetric around 0."""
    if n == 1:
        return [0.0]
    step = width / (n - 1)
    return [round(-width / 2 + i * step, 6) for i in range(n)]


# Query classification outcomes on the test split. Rows are the true class,
# columns the predicted class, both in LABELS order.
LABELS = ["General", "Retrieval", "Diagnosis", "TBC"]
CONFUSION = [
    [24, 0, 0, 0],
    [6, 301, 5, 6],
    [0, 2, 82, 1],
    [2, 0, 0, 32],
]


def classification():
    rows = []
    n = 0
    for i, truth in enumerate(LABELS):
        for j, pred in enumerate(LABELS):
            for _ in range(CONFUSION[i][j]):
                n += 1
                rows.append({"id": f"qc-test-{n:04}", "truth": truth, "predicted": pred})
    rng.shuffle(rows)
    write_jsonl(ROOT / "eval" / "classification_test.jsonl", rows)


# Question bank sizes per task and split.
TASKS = {
    "query_classification": (220, 461),
    "diagnosis": (52, 32),
    "disease_kr": (2808, 128),
    "vaccine_kr": (906, 191),
}
QUESTION_TYPES = {
    "query_classification": ["general", "retrieval", "diagnosis", "tbc"],
    "diagnosis": ["symptom-report"],
    "disease_kr": ["transmission", "prevention", "testing", "symptoms"],
    "vaccine_kr": ["dosage", "usage", "storage", "indication"],
}


def examples():
    rows = []
    for task, (val, test) in TASKS.items():
        for split, count in (("validation", val), ("test", test)):
            for i in range(count):
                qt = QUESTION_TYPES[task][i % len(QUESTION_TYPES[task])]
                rows.append({
                    "id": f"{task}-{split}-{i + 1:04}",
                    "task": task,
                    "split": split,
                    "question": f"{task.replace('_', ' ')} question {i + 1}",
                    "scenario": f"scenario {i % 7}",
                    "question_type": qt,
                    "document_source": {"file": f"source-{i % 11}.pdf", "page": 1 + i % 40},
                    "example_answer": f"reference answer {i + 1}",
                })
    write_jsonl(ROOT / "eval" / "examples.jsonl", rows)


# Per model and split: (label, correct, total, mean execution time in s).
DIAGNOSIS = {
    ("gpt-4o", "validation"): [("ASF", 7, 7, 20.09), ("PRRS", 4, 5, 19.20), ("PED", 4, 4, 19.02), ("FMD", 3, 6, 19.94), ("OOD", 28, 30, 19.53)],
    ("gpt-4o", "test"): [("ASF", 5, 5, 17.83), ("PRRS", 11, 14, 18.82), ("PED", 5, 5, 20.17), ("FMD", 7, 7, 18.75), ("OOD", 1, 1, 18.31)],
    ("o1-mini", "validation"): [("ASF", 7, 7, 27.69), ("PRRS", 5, 5, 31.03), ("PED", 4, 4, 31.38), ("FMD", 3, 6, 27.89), ("OOD", 24, 30, 28.91)],
    ("o1-mini", "test"): [("ASF", 5, 5, 28.55), ("PRRS", 10, 14, 29.19), ("PED", 5, 5, 31.24), ("FMD", 6, 7, 27.57), ("OOD", 1, 1, 26.57)],
    ("gemini", "validation"): [("ASF", 7, 7, 22.19), ("PRRS", 5, 5, 22.42), ("PED", 4, 4, 21.58), ("FMD", 3, 6, 23.52), ("OOD", 30, 30, 21.82)],
    ("gemini", "test"): [("ASF", 5, 5, 21.87), ("PRRS", 11, 14, 24.62), ("PED", 5, 5, 26.31), ("FMD", 6, 7, 20.62), ("OOD", 1, 1, 20.30)],
}
DISEASES = ["ASF", "PRRS", "PED", "FMD"]


def ranking(actual, hit):
    others = [d for d in DISEASES if d != actual]
    rng.shuffle(others)
    if actual == "OOD":
        return ["OOD"] + others[:1] if hit else others[:2] + ["OOD"]
    top = [actual, others[0]] if rng.random() < 0.5 else [others[0], actual]
    if hit:
        return top
    return [others[0], "OOD" if rng.random() < 0.5 else others[1], actual]


def diagnosis():
    for (model, split), cells in DIAGNOSIS.items():
        rows = []
        for label, correct, total, mean_t in cells:
            offsets = spread(total, 2.0)
            rng.shuffle(offsets)
            for i in range(total):
                rows.append({
                    "case_id": f"{split}-{label.lower()}-{i + 1:02}",
                    "actual": label,
                    "ranking": ranking(label, i < correct),
                    "exec_time_s": round(mean_t + offsets[i], 6),
                    "model": model,
                })
        write_jsonl(ROOT / "eval" / f"diagnosis_{model}_{split}.jsonl", rows)


# Rubric row means per (split, question set): baseline then ours, each as
# (accuracy, relevance, correctness, coherence, expansiveness, final).
RUBRIC = {
    ("validation", "vaccine"): ((4.12, 4.22, 4.15, 4.51, 4.03, 4.20), (4.46, 4.49, 4.47, 4.74, 4.17, 4.46)),
    ("validation", "disease"): ((1.89, 1.57, 2.09, 2.98, 1.82, 2.06), (4.14, 4.21, 4.15, 4.69, 3.44, 4.13)),
    ("test", "vaccine"): ((3.50, 3.62, 3.47, 4.10, 3.27, 3.57), (4.04, 4.04, 4.04, 4.49, 3.80, 4.08)),
    ("test", "disease"): ((3.32, 3.36, 3.42, 4.07, 2.76, 3.39), (3.84, 3.85, 3.83, 4.52, 3.42, 4.02)),
}
DIMS = ["accuracy", "relevance", "correctness", "coherence", "expansiveness"]
PER_ROW = 20


def rubric():
    rows = []
    for (split, dataset), systems in RUBRIC.items():
        for system, means in zip(("baseline", "ours"), systems):
            # Offsets are paired per example so system differences vary.
            columns = []
            for m in means:
                offs = spread(PER_ROW, 0.5)
                rng.shuffle(offs)
                columns.append([round(m + o, 6) for o in offs])
            for i in range(PER_ROW):
                rows.append({
                    "example_id": f"{split}-{dataset}-{i + 1:02}",
                    "system": system,
                    "split": split,
                    "dataset": dataset,
                    "dimensions": {d: columns[k][i] for k, d in enumerate(DIMS)},
                    "final": columns[5][i],
                })
    write_jsonl(ROOT / "eval" / "rubric.jsonl", rows)


def page(source_file, page_no, text, domain, disease=None, trade_names=None, group=None):
    meta = {"domain": domain}
    if disease:
        meta["disease_code"] = disease
    if trade_names:
        meta["trade_names"] = trade_names
    if group:
        meta["group"] = group
    return {"source_file": source_file, "page": page_no, "text": text, "metadata": meta}


def corpus():
    rows = [
        page("ASF-2022.pdf", 3, "African swine fever is a contagious viral disease of domestic and wild pigs. Mortality can approach one hundred percent.", "disease", "ASF"),
        page("ASF-2022.pdf", 12, "For ASF testing, collect blood, saliva, lymph nodes, organ samples. Do NOT perform on-farm necropsy!", "disease", "ASF"),
        page("ASF-2022.pdf", 15, "Clinical signs include high fever, red body, hemorrhages and sudden death. Report suspected cases to the veterinary authority.", "disease", "ASF"),
        page("PRRS-2021.pdf", 4, "PRRS testing uses serum samples and oral fluids. PCR confirms active infection.", "disease", "PRRS"),
        page("PRRS-2021.pdf", 9, "Reproductive failure and respiratory disease are typical. Sows may abort late in gestation.", "disease", "PRRS"),
        page("PED-2020.pdf", 2, "PED causes watery diarrhea and vomiting. Piglet mortality is high in the first week of life.", "disease", "PED"),
        page("FMD-2019.pdf", 6, "FMD produces blisters on the snout and feet. Lameness is common.", "disease", "FMD"),
        page("DLD-drugs.pdf", 7, "Agita is a fly bait. Scatter Agita granules near pig pens.", "vaccine", trade_names=["Agita"], group="insecticide"),
        page("DLD-vaccines.pdf", 21, "Ingelvac PRRS MLV is given as a single 2 mL intramuscular dose. Store between 2 and 8 degrees.", "vaccine", trade_names=["Ingelvac PRRS MLV"], group="vaccine"),
    ]
    write_jsonl(ROOT / "demo" / "corpus.jsonl", rows)


if __name__ == "__main__":
    classification()
    examples()
    diagnosis()
    rubric()
    corpus()
