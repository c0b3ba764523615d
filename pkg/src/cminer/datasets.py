"""Deterministic synthetic corpora for demos, benchmarks and tests.

Nothing here ships real-world text; bodies are drawn from small fixed word
pools with a seeded generator, so every corpus is reproducible bit for bit.
"""
from __future__ import annotations

import datetime

import numpy as np

from .corpus import Document

TOPIC_A_WORDS = ("solar", "wind", "turbine", "grid", "electricity",
                 "renewable", "capacity", "installation", "megawatt",
                 "efficiency")
TOPIC_B_WORDS = ("river", "flood", "rainfall", "coastal", "drought",
                 "irrigation", "watershed", "erosion", "salinity",
                 "groundwater")

CLASS_FUND_WORDS = ("grant", "loan", "fund", "donor", "budget", "finance",
                    "investment", "subsidy")
CLASS_RISK_WORDS = ("hazard", "storm", "exposure", "damage", "warning",
                    "evacuation", "shelter", "recovery")
SHARED_WORDS = ("project", "region", "report", "national", "program",
                "community", "plan", "sector", "annual", "review")

COUNTRY_NAMES = ("Atlantis", "Borduria", "Costaguana", "Elbonia",
                 "Freedonia", "Gran Fenwick", "Krakozhia", "Latveria",
                 "Molvania", "Osterlich", "Ruritania", "San Seriffe",
                 "Syldavia", "Zubrowka")

MITIGATION_WORDS = ("emission", "reduction", "target", "baseline", "energy",
                    "industry", "transport", "carbon", "trading", "policy",
                    "sector", "percent")
SUPPORT_WORDS = ("adaptation", "support", "finance", "vulnerability",
                 "capacity", "resilience", "funding", "assistance",
                 "technology", "transfer", "priority", "implementation")

# minor side themes so a K=10 fit has real structure to latch onto
SIDE_THEMES = (
    ("forest", "deforestation", "reforestation", "timber", "biodiversity",
     "conservation", "woodland", "habitat"),
    ("agriculture", "crop", "livestock", "soil", "harvest", "fertilizer",
     "farming", "yield"),
    ("waste", "recycling", "landfill", "composting", "sewage", "disposal",
     "incineration", "sanitation"),
    ("health", "disease", "hospital", "nutrition", "epidemic", "clinic",
     "medicine", "vaccination"),
    ("railway", "vehicle", "highway", "transit", "freight", "aviation",
     "shipping", "mobility"),
    ("tourism", "heritage", "hotel", "visitor", "recreation", "coastline",
     "destination", "hospitality"),
    ("fisheries", "aquaculture", "fishing", "marine", "mangrove", "reef",
     "ocean", "coral"),
    ("education", "school", "training", "curriculum", "awareness", "teacher",
     "literacy", "campaign"),
)


def make_two_topic_corpus(n_docs: int = 40, doc_len: int = 50,
                          seed: int = 0) -> tuple[list[Document], dict[str, int]]:
    """Documents drawn from two disjoint 10-word vocabularies.

    Even documents use topic 0 words, odd documents topic 1; the metadata
    field ``group`` records the generating topic. Returns the corpus and a
    doc id -> generating topic map.
    """
    rng = np.random.default_rng(seed)
    vocabs = (TOPIC_A_WORDS, TOPIC_B_WORDS)
    docs = []
    gold = {}
    for d in range(n_docs):
        topic = d % 2
        words = rng.choice(vocabs[topic], size=doc_len)
        doc_id = f"{d:06d}"
        docs.append(Document(id=doc_id, title=f"synthetic {d}",
                             body=" ".join(words),
                             metadata={"group": "A" if topic == 0 else "B"}))
        gold[doc_id] = topic
    return docs, gold


def make_coding_corpus(n_docs: int = 200,
                       seed: int = 0) -> tuple[list[Document], dict[str, str]]:
    """Separable two-class corpus for classifier and active-learning tests.

    Every document mixes class-signal words with shared filler at a varying
    ratio, so a classifier trained on a handful of labels is imperfect and
    improves as labels accumulate.
    """
    rng = np.random.default_rng(seed)
    classes = (("fund", CLASS_FUND_WORDS), ("risk", CLASS_RISK_WORDS))
    docs = []
    gold = {}
    for d in range(n_docs):
        code, signal_words = classes[d % 2]
        length = int(rng.integers(8, 25))
        n_signal = max(1, int(round(float(rng.uniform(0.15, 0.6)) * length)))
        words = list(rng.choice(signal_words, size=n_signal))
        words += list(rng.choice(SHARED_WORDS, size=length - n_signal))
        rng.shuffle(words)
        doc_id = f"{d:06d}"
        docs.append(Document(id=doc_id, body=" ".join(words)))
        gold[doc_id] = code
    return docs, gold


def make_study_corpus(n_pledges: int = 60, doc_len: int = 100, seed: int = 0
                      ) -> tuple[list[Document], dict[str, str]]:
    """Pledge-style corpus with country mentions and a binary group field.

    Group ``annex1`` pledges are dominated by mitigation vocabulary, group
    ``nonannex`` pledges by support vocabulary. Sector reports without the
    group field cover eight side themes, one theme per spare topic, so a
    ten-topic model recovers one theme per topic instead of splitting the
    two pledge themes. Country names recur so that an entity blacklist has
    something to remove, and a few numerals and one-letter words exercise
    the length/number filters. Returns the corpus and the country gazetteer
    (surface -> LOCATION).
    """
    rng = np.random.default_rng(seed)
    pledges = []
    for d in range(n_pledges):
        group = "annex1" if d % 2 == 0 else "nonannex"
        theme = MITIGATION_WORDS if group == "annex1" else SUPPORT_WORDS
        country = COUNTRY_NAMES[d % len(COUNTRY_NAMES)]
        theme_share = float(rng.uniform(0.92, 0.97))
        n_theme = int(round(theme_share * doc_len))
        words = list(rng.choice(theme, size=n_theme))
        for _ in range(doc_len - n_theme):
            side = SIDE_THEMES[int(rng.integers(0, len(SIDE_THEMES)))]
            words.append(str(rng.choice(side)))
        rng.shuffle(words)
        # salt with the country name, a numeral and a too-short word
        for _ in range(6):
            words.insert(int(rng.integers(0, len(words))), country)
        words.insert(int(rng.integers(0, len(words))), "2030")
        words.insert(int(rng.integers(0, len(words))), "a")
        year = 2015 + d % 3
        pledges.append(Document(
            id=f"{d:06d}",
            title=f"pledge of {country}",
            body=" ".join(words) + ".",
            date=datetime.date(year, 1 + d % 12, 1),
            metadata={"country": country, "group": group}))
    reports = []
    n_reports = 6
    for s, side in enumerate(SIDE_THEMES):
        for r in range(n_reports):
            n = int(rng.integers(100, 160))
            words = list(rng.choice(side, size=n))
            for _ in range(max(2, n // 30)):
                other = SIDE_THEMES[int(rng.integers(0, len(SIDE_THEMES)))]
                words.insert(int(rng.integers(0, len(words))),
                             str(rng.choice(other)))
            reports.append(Document(
                id=f"{n_pledges + n_reports * s + r:06d}",
                title=f"sector report {side[0]} {r}",
                body=" ".join(words) + ".",
                date=datetime.date(2016, 1 + (s + r) % 12, 15),
                metadata={"sector": side[0]}))
    gazetteer = {name: "LOCATION" for name in COUNTRY_NAMES}
    # reports lead so the sampler's warm start settles side themes before
    # the two big pledge themes arrive
    return reports + pledges, gazetteer
