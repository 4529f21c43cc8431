"""Synthetic interview corpus with planted themes.

Each theme owns a 40-word vocabulary. An interview is a sequence of theme
segments; a segment is a run of sentences that mix theme words with shared
filler, sprinkled with interviewer questions, fillers like "uh", contractions,
speaker tags and section headers so the whole preprocessing chain is exercised.
"""
from __future__ import annotations

import json
import random
from pathlib import Path

from topicctl.errors import ConfigError

THEME_VOCAB: list[list[str]] = [
    # treatment / chemotherapy
    "chemotherapy infusion nausea oncologist dosage cycles vomiting fatigue "
    "antiemetic drip premedication steroids neuropathy tingling bloodwork "
    "platelets neutropenia cisplatin docetaxel regimen oncology infusions "
    "hydration catheter portacath cannula pharmacy tablets capecitabine "
    "mouthwash ulcers taste metallic baldness wig scalp cooling cap "
    "leukocytes transfusion",
    # surgery
    "surgery surgeon incision anaesthesia anesthetist stitches scar theatre "
    "keyhole laparoscopy resection recovery ward drain wound dressing "
    "sutures morphine epidural catheterization tumour removal margins "
    "pathologist biopsy lymph nodes specimen operation postoperative "
    "intensive monitoring staples bandage physiotherapist mobilisation "
    "discharge stoma bowel clamps",
    # diagnosis / imaging
    "scan mri ultrasound radiologist contrast tracer pet ct mammogram "
    "screening diagnosis metastases staging lesion shadow radiology "
    "examination results waiting anxiety uncertainty referral gp "
    "appointment letter colonoscopy endoscopy sample marker cea liver lungs "
    "spots nodule suspicious malignant benign confirmation xray sonographer",
    # nutrition / diet
    "nutrition diet dietitian protein vegetables fruit turmeric supplements "
    "vitamins appetite weight kilos shakes smoothies juice sugar meat "
    "vegetarian organic recipes cooking breakfast lunch dinner snacks "
    "yoghurt broth soup ginger herbal tea calories fibre nuts seeds "
    "fasting portions hunger lentils porridge",
    # family / emotional support
    "children grandchildren husband wife daughter son grandson partner "
    "siblings brother sister mother father family support hugs tears "
    "crying sadness fear courage hope love friends neighbours visits "
    "birthday christmas holidays garden walks dog church prayer comfort "
    "loneliness grief memories cousins reassurance",
    # radiotherapy
    "radiotherapy radiation cyberknife linac beams sessions fractions "
    "tattoo markings mask immobilisation rotterdam physicist planning "
    "dosimetry burns redness skin cream irradiation bunker machine "
    "technicians alignment targeting precision stereotactic gantry "
    "couch positioning fraction boost brachytherapy implant "
    "protons isotope collimator radiographer sievert halo",
]
THEME_VOCAB = [words.split() for words in THEME_VOCAB]

FILLER = (
    "we went there then and it was a long day I felt that time very much "
    "with them also after before about when what because the doctor "
    "nurse hospital told me my our it was quite difficult normal"
).split()
INTERVIEWER_QUESTIONS = (
    "How did that feel for you?",
    "What happened after that?",
    "Can you tell me a bit more about it?",
    "Who was with you at that moment?",
    "And how are you doing now?",
)
DISFLUENCIES = ("uh", "yeah", "um", "okay")
CONTRACTION_SNIPPETS = ("It wasn't easy.", "I didn't know.", "That's how it went.", "We'd seen it before.")

_SYLLABLES = "ka lo mi ne ru ta vo si pe du fa ge hi jo ba ze".split()


def _pseudo_vocab(theme: int, rng: random.Random) -> list[str]:
    words: set[str] = set()
    while len(words) < 40:
        words.add("".join(rng.choice(_SYLLABLES) for _ in range(3)) + f"x{theme}")
    return sorted(words)


def theme_vocabularies(n_themes: int, seed: int = 0) -> list[list[str]]:
    if n_themes < 1:
        raise ConfigError("need at least one theme")
    rng = random.Random(seed)
    out = [list(v) for v in THEME_VOCAB[:n_themes]]
    for t in range(len(out), n_themes):
        out.append(_pseudo_vocab(t, rng))
    return out


def _theme_sentence(vocab: list[str], rng: random.Random) -> str:
    words = rng.sample(vocab, rng.randint(4, 6)) + rng.sample(FILLER, rng.randint(2, 4))
    rng.shuffle(words)
    if rng.random() < 0.3:
        words.insert(rng.randrange(1, len(words)), rng.choice(DISFLUENCIES))
    text = " ".join(words)
    return text[0].upper() + text[1:] + rng.choice((".", ".", ".", "!", "?"))


def generate_corpus(
    n_themes: int = 5,
    n_interviews: int = 13,
    seed: int = 0,
    themes_per_interview: int = 3,
) -> tuple[dict[str, list[str]], list[list[str]]]:
    """Return ``({interview_id: lines}, theme_vocabularies)``."""
    if n_interviews < 1:
        raise ConfigError("need at least one interview")
    vocabs = theme_vocabularies(n_themes, seed)
    rng = random.Random(seed)
    per = min(themes_per_interview, n_themes)
    corpus: dict[str, list[str]] = {}
    for i in range(n_interviews):
        themes = [(i + j * 2) % n_themes for j in range(per)] if n_themes > 1 else [0]
        themes = list(dict.fromkeys(themes))
        rng.shuffle(themes)
        lines = []
        for s, theme in enumerate(themes):
            lines.append(f"I{i}-{s + 1}")
            for _ in range(rng.randint(18, 30)):
                roll = rng.random()
                if roll < 0.08:
                    lines.append("O: " + rng.choice(INTERVIEWER_QUESTIONS))
                elif roll < 0.12:
                    lines.append("P: " + rng.choice(CONTRACTION_SNIPPETS))
                else:
                    speaker = "N" if rng.random() < 0.15 else "P"
                    lines.append(f"{speaker}: " + _theme_sentence(vocabs[theme], rng))
        corpus[f"I{i}"] = lines
    return corpus, vocabs


def write_corpus(out_dir: str | Path, n_themes: int = 5, n_interviews: int = 13, seed: int = 0) -> list[list[str]]:
    """Write ``I<k>.txt`` files plus ``themes.json`` (the planted vocabularies)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus, vocabs = generate_corpus(n_themes, n_interviews, seed)
    for iid, lines in corpus.items():
        (out_dir / f"{iid}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out_dir / "themes.json").write_text(json.dumps({"seed": seed, "themes": vocabs}, indent=2) + "\n", encoding="utf-8")
    return vocabs
