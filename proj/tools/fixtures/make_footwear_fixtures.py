#!/usr/bin/env python3
"""Builds the therapeutic-footwear fixture notes and gold annotations.

Writes, under data/fixtures/:
  footwear/notes/<id>.txt, footwear/annotations.jsonl, footwear/expected.json
  footwear_bulk/...  (same layout, random leaf states, for noise studies)

Every gold evidence string is checked to occur verbatim in its note, and
every hand-written expected decision is checked against an evaluation of
the checklist written here from the three-valued rules.
"""
import json
import random
from pathlib import Path

LEAVES = ["1", "2.a", "2.b", "2.c", "2.d", "2.e", "2.f"]

# (sentence, exact gold substring) per leaf and judgment.
EVIDENCE = {
    ("1", "True"): [
        ("Past medical history is significant for type 2 diabetes mellitus, managed with metformin.",
         "type 2 diabetes mellitus"),
        ("She has had insulin-dependent diabetes since age 30.", "insulin-dependent diabetes"),
        ("Problem list includes diabetes mellitus with last HbA1c of 8.1%.", "diabetes mellitus with last HbA1c of 8.1%"),
    ],
    ("1", "False"): [
        ("Fasting glucose and HbA1c are normal and he has no history of diabetes.", "no history of diabetes"),
        ("Screening labs were reviewed and diabetes was ruled out.", "diabetes was ruled out"),
    ],
    ("2.a", "True"): [
        ("Status post transmetatarsal amputation of the right foot in 2015.",
         "transmetatarsal amputation of the right foot"),
        ("He underwent amputation of the left fifth toe after osteomyelitis.", "amputation of the left fifth toe"),
    ],
    ("2.a", "False"): [
        ("There have been no prior amputations of either lower extremity.", "no prior amputations"),
        ("All toes are present and there is no amputation history.", "no amputation history"),
    ],
    ("2.b", "True"): [
        ("She has a history of a plantar ulcer on the left great toe that healed last year.",
         "history of a plantar ulcer on the left great toe"),
        ("Prior foot ulceration under the right first metatarsal head required offloading.",
         "Prior foot ulceration under the right first metatarsal head"),
    ],
    ("2.b", "False"): [
        ("The patient denies any previous foot ulcers.", "denies any previous foot ulcers"),
        ("No history of ulceration on either foot.", "No history of ulceration on either foot"),
    ],
    ("2.c", "True"): [
        ("A pre-ulcerative callus is noted beneath the second metatarsal head.", "pre-ulcerative callus"),
        ("Podiatry has been debriding pre-ulcerative calluses on both heels.", "debriding pre-ulcerative calluses"),
    ],
    ("2.c", "False"): [
        ("The plantar skin of both feet is intact without calluses.", "intact without calluses"),
    ],
    ("2.d", "True"): [
        ("Monofilament testing confirms peripheral neuropathy with callus formation on the right heel.",
         "peripheral neuropathy with callus formation"),
        ("Diabetic neuropathy is present with thick callus over the left forefoot.",
         "Diabetic neuropathy is present with thick callus"),
    ],
    ("2.d", "False"): [
        ("Sensation is intact to monofilament bilaterally with no neuropathy.", "no neuropathy"),
    ],
    ("2.e", "True"): [
        ("Exam shows a hammertoe deformity of the left second toe.", "hammertoe deformity"),
        ("Radiographs demonstrate a Charcot foot deformity on the right.", "Charcot foot deformity"),
        ("There is a prominent bunion deformity of the right foot.", "bunion deformity of the right foot"),
    ],
    ("2.e", "False"): [
        ("Foot alignment is normal and no foot deformity is present.", "no foot deformity is present"),
    ],
    ("2.f", "True"): [
        ("Dorsalis pedis pulses are absent bilaterally, consistent with poor circulation.", "poor circulation"),
        ("He has peripheral arterial disease with claudication after one block.",
         "peripheral arterial disease with claudication"),
    ],
    ("2.f", "False"): [
        ("Pedal pulses are 2+ and capillary refill is brisk, so circulation is adequate.", "circulation is adequate"),
    ],
}

FILLER = [
    "Patient presents for routine follow-up.",
    "She arrived accompanied by her daughter.",
    "Vital signs are within normal limits.",
    "Blood pressure is 132/78 and heart rate is 72.",
    "He reports good adherence to his medications.",
    "Lungs are clear to auscultation bilaterally.",
    "Heart has a regular rate and rhythm without murmurs.",
    "Abdomen is soft and non-tender.",
    "The patient lives independently in a single-story home.",
    "She walks about two miles most days.",
    "He quit smoking ten years ago.",
    "Alcohol use is limited to one glass of wine on weekends.",
    "Current medications were reconciled at this visit.",
    "Influenza vaccine was administered today.",
    "Allergies include penicillin, which causes a rash.",
    "Lipid panel from last month was reviewed.",
    "The patient asked about appropriate exercise.",
    "Weight is stable compared with the prior visit.",
    "Sleep is reported as adequate.",
    "Mood is good and there are no depressive symptoms.",
    "Vision was checked by ophthalmology in the spring.",
    "Renal function remains stable.",
    "Thyroid studies were normal.",
    "He works part time as a librarian.",
    "She is retired and volunteers at a food bank.",
    "Family history is notable for hypertension.",
    "Dental care is up to date.",
    "There is no chest pain or shortness of breath.",
    "Bowel and bladder habits are unchanged.",
    "The patient was counseled on diet and nutrition.",
    "Skin elsewhere shows no rashes.",
    "Gait is steady without an assistive device.",
    "Reflexes are symmetric at the knees.",
    "A follow-up visit is planned in three months.",
    "Orders were placed for routine labs.",
    "Questions were answered and the patient agrees with the plan.",
    "Education materials were provided.",
    "Home blood pressure readings were reviewed.",
    "The patient uses a pill organizer.",
    "Shoes currently worn are standard athletic sneakers.",
    "Insurance information was verified at check-in.",
    "Immunization record was updated.",
    "No recent hospitalizations were reported.",
    "The knee pain from last visit has resolved.",
    "Hearing is grossly intact.",
    "Neck is supple without lymphadenopathy.",
    "Cognition appears intact during the interview.",
    "He denies fevers or chills.",
    "Appetite is normal.",
    "She drives herself to appointments.",
    "Medication side effects were discussed.",
    "Care plan was documented and signed.",
]

HEADERS = ["HISTORY OF PRESENT ILLNESS:", "PAST MEDICAL HISTORY:", "PHYSICAL EXAM:", "ASSESSMENT AND PLAN:"]

# Hand-assigned leaf states for the reviewed suite. Leaves not listed are
# NoInformation. "y" is the expected necessity decision worked out by hand.
SUITE = [
    ("fw01", {"1": "True", "2.b": "True"}, 1),
    ("fw02", {"1": "True", "2.a": "False", "2.b": "False", "2.c": "False", "2.d": "False", "2.e": "False",
              "2.f": "False"}, -1),
    ("fw03", {"1": "False", "2.a": "True"}, -1),
    ("fw04", {"2.c": "True"}, 0),
    ("fw05", {"1": "True"}, 0),
    ("fw06", {"1": "True", "2.a": "False", "2.b": "False", "2.d": "False", "2.e": "False", "2.f": "False"}, 0),
    ("fw07", {"1": "True", "2.e": "True", "2.f": "False"}, 1),
    ("fw08", {"1": "False"}, -1),
    ("fw09", {"1": "True", "2.a": "False", "2.b": "False", "2.c": "False", "2.d": "True", "2.e": "False",
              "2.f": "True"}, 1),
    ("fw10", {"2.a": "False", "2.b": "False", "2.c": "False", "2.d": "False", "2.e": "False", "2.f": "False"}, -1),
    ("fw11", {"1": "True", "2.f": "True"}, 1),
    ("fw12", {"1": "True", "2.a": "True", "2.b": "True", "2.c": "True", "2.d": "True", "2.e": "True",
              "2.f": "True"}, 1),
    ("fw13", {}, 0),
    ("fw14", {"1": "True", "2.b": "False", "2.e": "True"}, 1),
    ("fw15", {"1": "False", "2.a": "False", "2.b": "False", "2.c": "False", "2.d": "False", "2.e": "False",
              "2.f": "False"}, -1),
    ("fw16", {"1": "True", "2.a": "False", "2.b": "False", "2.c": "False", "2.e": "False", "2.f": "False"}, 0),
    ("fw17", {"1": "True", "2.a": "True", "2.b": "False", "2.c": "False", "2.d": "False", "2.e": "False",
              "2.f": "False"}, 1),
    ("fw18", {"2.b": "True"}, 0),
    ("fw19", {"1": "True", "2.d": "False"}, 0),
    ("fw20", {"1": "True", "2.c": "True", "2.e": "False"}, 1),
    ("fw21", {"1": "False", "2.b": "True", "2.f": "True"}, -1),
    ("fw22", {"1": "True", "2.a": "False", "2.b": "False", "2.c": "False", "2.d": "False", "2.e": "False",
              "2.f": "True"}, 1),
]


def tv_and(values):
    if "False" in values:
        return "False"
    if "NoInformation" in values:
        return "NoInformation"
    return "True"


def tv_or(values):
    if "True" in values:
        return "True"
    if "NoInformation" in values:
        return "NoInformation"
    return "False"


def footwear_y(states):
    item2 = tv_or([states[l] for l in LEAVES[1:]])
    root = tv_and([states["1"], item2])
    return {"True": 1, "False": -1, "NoInformation": 0}[root]


def compose(note_id, states, rng):
    """Returns (text, annotations)."""
    n_filler = rng.randint(38, 56)
    body = rng.sample(FILLER, min(n_filler, len(FILLER)))
    annotations = []
    for leaf in LEAVES:
        judgment = states[leaf]
        gold = []
        if judgment != "NoInformation":
            sentence, phrase = rng.choice(EVIDENCE[(leaf, judgment)])
            body.insert(rng.randrange(len(body) + 1), sentence)
            gold = [phrase]
        annotations.append({"note_id": note_id, "leaf_id": leaf, "gold_judgment": judgment, "gold_evidence": gold})
    # Split the body into header sections.
    cuts = sorted(rng.sample(range(1, len(body)), len(HEADERS) - 1))
    parts, start = [], 0
    for header, end in zip(HEADERS, cuts + [len(body)]):
        parts.append(header + "\n" + " ".join(body[start:end]))
        start = end
    text = "\n\n".join(parts) + "\n"
    for a in annotations:
        for g in a["gold_evidence"]:
            assert g in text, (note_id, g)
    return text, annotations


def write_set(out_dir, cases, seed):
    rng = random.Random(seed)
    notes = out_dir / "notes"
    notes.mkdir(parents=True, exist_ok=True)
    expected = {}
    with open(out_dir / "annotations.jsonl", "w") as ann:
        for note_id, states, y in cases:
            text, annotations = compose(note_id, states, rng)
            (notes / f"{note_id}.txt").write_text(text)
            for a in annotations:
                ann.write(json.dumps(a) + "\n")
            expected[note_id] = y
    (out_dir / "expected.json").write_text(json.dumps(expected, indent=2, sort_keys=True) + "\n")


def main():
    root = Path(__file__).resolve().parents[2] / "data" / "fixtures"

    suite = []
    for note_id, partial, y in SUITE:
        states = {l: partial.get(l, "NoInformation") for l in LEAVES}
        assert footwear_y(states) == y, f"hand value for {note_id} disagrees with the rules"
        suite.append((note_id, states, y))
    write_set(root / "footwear", suite, seed=7)

    rng = random.Random(20261016)
    bulk = []
    for i in range(150):
        states = {l: rng.choice(["True", "False", "NoInformation"]) for l in LEAVES}
        bulk.append((f"bulk{i:03d}", states, footwear_y(states)))
    write_set(root / "footwear_bulk", bulk, seed=8)


if __name__ == "__main__":
    main()
