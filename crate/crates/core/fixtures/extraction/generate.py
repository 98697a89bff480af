"""Regenerate the extraction fixture corpus.

Writes manifest.jsonl (reports only), gold.jsonl (reference triplets),
responses.jsonl (recorded model responses keyed by prompt sha256) and a
blank 8x8 image shared by every study. Run from this directory.
"""

import hashlib
import json
from pathlib import Path

from PIL import Image

HERE = Path(__file__).resolve().parent
TEMPLATE = (HERE / "../../data/prompt_template.txt").read_text()

# (report, gold triplets, recorded response or None to render gold plainly)
STUDIES = [
    ("There is a small left-sided pleural effusion.", ["small|left-sided|pleural effusion"], None),
    ("Mild cardiomegaly. Bilateral pleural effusions.", ["mild||cardiomegaly", "|bilateral|pleural effusion"], None),
    ("No acute cardiopulmonary process.", [], ""),
    ("No pneumothorax, but there is a moderate right pleural effusion.", ["moderate|right|pleural effusion"], None),
    ("Mild cardiomegaly and left lower lobe atelectasis.", ["mild||cardiomegaly", "|left lower lobe|atelectasis"], "1. mild||cardiomegaly\n2. |left lower lobe|atelectasis"),
    ("A 1.5 cm right upper lobe nodule.", ["|right upper lobe|nodule"], None),
    ("Severe bilateral pulmonary edema. Small right effusion; no pneumothorax.", ["severe|bilateral|pulmonary edema", "small|right|effusion"], None),
    ("Lungs are clear. No pleural effusion or pneumothorax.", [], "None"),
    ("Patchy right basilar opacity concerning for pneumonia.", ["|right basilar|opacity", "||pneumonia"], "none|right basilar|opacity\nnone|none|pneumonia"),
    ("Moderate cardiomegaly with mild pulmonary edema.", ["moderate||cardiomegaly", "mild||pulmonary edema"], None),
    ("Large left pneumothorax.", ["large|left|pneumothorax"], "Large|Left|Pneumothorax"),
    ("Retrocardiac consolidation. Trace bilateral effusions.", ["|retrocardiac|consolidation", "trace|bilateral|effusion"], None),
    ("Hyperinflated lungs consistent with emphysema.", ["||emphysema"], None),
    ("Chronic interstitial lung disease without acute superimposed process.", ["chronic||interstitial lung disease"], None),
    ("Healed right rib fractures.", ["|right|rib fracture"], None),
    ("Small hiatal hernia.", ["small||hiatal hernia"], "- small||hiatal hernia"),
    ("Calcified left upper lobe granuloma.", ["|left upper lobe|granuloma"], None),
    ("No focal consolidation. Heart size is normal.", [], ""),
    ("Subsegmental atelectasis at the lung bases.", ["|subsegmental|atelectasis"], None),
    ("Extensive bilateral pneumonia.", ["extensive|bilateral|pneumonia"], None),
    ("Mild pulmonary edema; small bilateral pleural effusions.", ["mild||pulmonary edema", "small|bilateral|pleural effusion"], None),
    ("Right middle lobe mass.", ["|right middle lobe|mass"], None),
    ("Findings consistent with covid-19 with diffuse opacities.", ["||covid-19", "|diffuse|opacity"], None),
    ("There is apical pleural thickening.", ["|apical|pleural thickening"], None),
    ("Minimal left basilar atelectasis. No effusion.", ["minimal|left basilar|atelectasis"], None),
    ("Enlarged cardiomediastinum.", ["||enlarged cardiomediastinum"], None),
    ("Stable calcifications.", ["||calcification"], None),
    ("Perihilar infiltrates are noted.", ["|perihilar|infiltrate"], None),
    ("Tiny right apical pneumothorax.", ["tiny|right apical|pneumothorax"], None),
    ("Severe emphysema and a large right lower lobe mass.", ["severe||emphysema", "large|right lower lobe|mass"], None),
    ("No evidence of pneumonia.", [], ""),
    ("Moderate left pleural effusion with adjacent atelectasis.", ["moderate|left|pleural effusion", "||atelectasis"], "moderate|left|pleural effusion\nn/a|n/a|atelectasis"),
    ("Mild fibrosis at the bases.", ["mild||fibrosis"], None),
    ("Lingular atelectasis.", ["|lingular|atelectasis"], None),
    ("Multiple pulmonary nodules.", ["||pulmonary nodule"], None),
    ("Marked cardiomegaly.", ["marked||cardiomegaly"], "Findings:\nmarked||cardiomegaly"),
    ("Acute left lower lobe pneumonia.", ["acute|left lower lobe|pneumonia"], None),
    ("No pneumothorax. Small left effusion.", ["small|left|effusion"], None),
    ("Mild bibasilar atelectasis.", ["mild|bibasilar|atelectasis"], None),
    ("Right-sided rib fracture.", ["|right-sided|rib fracture"], None),
    ("Diffuse interstitial lung disease. Moderate cardiomegaly.", ["|diffuse|interstitial lung disease", "moderate||cardiomegaly"], None),
    ("Subtle right lower lobe opacity.", ["subtle|right lower lobe|opacity"], None),
    ("Central pulmonary edema.", ["|central|pulmonary edema"], None),
    ("Massive right pleural effusion.", ["massive|right|pleural effusion"], None),
    ("Peripheral consolidation in the left lung.", ["|peripheral|consolidation"], None),
    ("Free of effusion; mild edema persists.", ["mild||edema"], None),
    ("No cardiomegaly however there is mild pulmonary edema.", ["mild||pulmonary edema"], None),
    # Location after the category: the lexicon rules only look backwards.
    ("Pneumothorax on the left.", ["|left|pneumothorax"], None),
    ("Moderate mediastinal lung lesion.", ["moderate|mediastinal|lung lesion"], None),
    # Recorded response also lists the negated finding.
    ("Small right pneumothorax. No effusion.", ["small|right|pneumothorax"], "small|right|pneumothorax\n||effusion"),
]


def prompt(report: str) -> str:
    head, tail = TEMPLATE.split("{report}")
    return head + report + tail


def main() -> None:
    assert len(STUDIES) == 50, len(STUDIES)
    Image.new("L", (8, 8), 0).save(HERE / "blank.png")
    with open(HERE / "manifest.jsonl", "w") as m, open(HERE / "gold.jsonl", "w") as g, open(
        HERE / "responses.jsonl", "w"
    ) as r:
        for i, (report, gold, response) in enumerate(STUDIES):
            sid = f"fx-{i:03d}"
            m.write(json.dumps({"id": sid, "image": "blank.png", "report": report}) + "\n")
            g.write(json.dumps({"id": sid, "triplets": gold}) + "\n")
            text = "\n".join(gold) if response is None else response
            sha = hashlib.sha256(prompt(report).encode()).hexdigest()
            r.write(json.dumps({"prompt_sha": sha, "response": text}) + "\n")


if __name__ == "__main__":
    main()
