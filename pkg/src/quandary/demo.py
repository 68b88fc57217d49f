"""Demo assets: golden tables, a small labeled corpus, a synthetic seed
corpus builder, and a demo model trained on the labeled corpus.

``python -m quandary.demo OUTDIR`` writes everything needed to run the
service and the web UI against the canonical examples.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

from .align import MatchConfig, fuzzy_score
from .core import (
    BioLabel,
    Concept,
    ConceptKind,
    GroundingPair,
    LabeledExample,
    TableSchema,
    make_example,
    save_dataset,
    tokenize,
)
from .crf import CrfModel, TrainConfig, featurize, save_model, train
from .generate import TemplateProvider, make_ambiguous, make_unanswerable, weak_label_seed

O = BioLabel.O

#: Matching config used by all shipped fixtures. The library default
#: threshold (0.72) only admits near-exact matches under the blended
#: trigram/edit metric; 0.35 is the calibration at which partial mentions
#: like "rating" reach all three rating columns of the demo table.
DEMO_MATCH = MatchConfig(max_ngram=5, threshold=0.35, top_k=3)


# ---------------------------------------------------------------------------
# Golden tables
# ---------------------------------------------------------------------------

def golden_tables() -> dict[str, TableSchema]:
    return {
        "movies": TableSchema(
            "movies",
            ("Title", "IMDB Rating", "Rotten Tomatoes Rating", "Content Rating"),
            {
                "Title": ("Avatar", "Titanic", "Inception", "The Godfather", "Interstellar"),
                "IMDB Rating": ("7.9", "8.1", "8.7", "9.2", "8.6"),
                "Rotten Tomatoes Rating": ("82%", "88%", "87%", "97%", "73%"),
                "Content Rating": ("PG-13", "R", "PG"),
            },
        ),
        "phones": TableSchema(
            "phones",
            ("Brand", "Price", "Storage"),
            {
                "Brand": ("Apple", "Samsung", "Huawei", "Xiaomi"),
                "Price": ("499", "599", "699", "999"),
                "Storage": ("64GB", "128GB", "256GB"),
            },
        ),
        "games": TableSchema(
            "games",
            ("Date", "Opponent", "Score", "Record"),
            {
                "Date": ("March 3", "April 12", "May 9", "June 21"),
                "Opponent": ("Lakers", "Celtics", "Bulls", "Heat"),
                "Score": ("101–98", "95–92", "88–90", "110–104"),
                "Record": ("0–2", "1–1", "2–0", "3–1"),
            },
        ),
        "sales": TableSchema(
            "sales",
            ("Sales", "Region"),
            {
                "Sales": ("1200", "3400", "560", "2100"),
                "Region": ("East", "West", "North", "South"),
            },
        ),
        "films": TableSchema(
            "films",
            ("Title", "Length"),
            {
                "Title": ("The Godfather", "Casablanca", "Vertigo"),
                "Length": ("175 min", "102 min", "128 min"),
            },
        ),
    }


GOLDEN_AMBIGUOUS_QUESTION = "what is the rating of the movie"
GOLDEN_UNANSWERABLE_QUESTION = "what is the model name of phone whose price is greater than 500"


def _rating_candidates(schema: TableSchema) -> tuple[tuple[Concept, float], ...]:
    scored = [
        (Concept.for_column(col), fuzzy_score("rating", col))
        for col in ("IMDB Rating", "Content Rating", "Rotten Tomatoes Rating")
    ]
    scored.sort(key=lambda cs: -cs[1])
    return tuple(scored)


def golden_ambiguous_example(movies: TableSchema) -> LabeledExample:
    labels = [O, O, O, BioLabel.B_AMB, O, O, O]
    pair = GroundingPair(span=(3, 3), candidates=_rating_candidates(movies))
    return make_example(GOLDEN_AMBIGUOUS_QUESTION, movies, labels, [pair])


def golden_unanswerable_example(phones: TableSchema) -> LabeledExample:
    labels = [O] * 13
    labels[3], labels[4] = BioLabel.B_UNK, BioLabel.I_UNK
    labels[8] = BioLabel.B_COL
    pair = GroundingPair(span=(8, 8), candidates=((Concept.for_column("Price"), 1.0),))
    return make_example(GOLDEN_UNANSWERABLE_QUESTION, phones, labels, [pair])


# ---------------------------------------------------------------------------
# Demo corpus and model
# ---------------------------------------------------------------------------

def _seed(question: str, schema: TableSchema, sql: str) -> LabeledExample:
    return make_example(question, schema, [O] * len(tokenize(question)), sql=sql)


def demo_corpus() -> list[LabeledExample]:
    """Answerable seeds with weak labels plus handcrafted and generated
    problematic examples; the training set behind the demo model."""
    tables = golden_tables()
    movies, phones, games = tables["movies"], tables["phones"], tables["games"]
    cfg = DEMO_MATCH

    seeds = [
        _seed("what is the imdb rating of Titanic", movies,
              "SELECT `IMDB Rating` FROM t WHERE Title = 'Titanic'"),
        _seed("what is the content rating of Avatar", movies,
              "SELECT `Content Rating` FROM t WHERE Title = 'Avatar'"),
        _seed("what is the rotten tomatoes rating of Inception", movies,
              "SELECT `Rotten Tomatoes Rating` FROM t WHERE Title = 'Inception'"),
        _seed("what is the IMDB Rating of the movie", movies,
              "SELECT `IMDB Rating` FROM t"),
        _seed("what is the title of the movie", movies, "SELECT Title FROM t"),
        _seed("what is the price of Apple", phones,
              "SELECT Price FROM t WHERE Brand = 'Apple'"),
        _seed("what is the storage of Samsung", phones,
              "SELECT Storage FROM t WHERE Brand = 'Samsung'"),
        _seed("what is the brand of the phone", phones, "SELECT Brand FROM t"),
        _seed("What is the score where record is 0–2?", games,
              "SELECT Score FROM t WHERE Record = '0–2'"),
        _seed("who is the opponent where record is 1–1", games,
              "SELECT Opponent FROM t WHERE Record = '1–1'"),
        _seed("what is the date where score is 95–92", games,
              "SELECT Date FROM t WHERE Score = '95–92'"),
        _seed("show sales by region", tables["sales"],
              "SELECT Sales FROM t WHERE Region = 'East'"),
        _seed("how long is godfather", tables["films"],
              "SELECT Length FROM t WHERE Title = 'The Godfather'"),
    ]
    corpus = []
    for seed in seeds:
        labeled = weak_label_seed(seed, cfg)
        assert labeled is not None
        corpus.append(labeled)

    corpus.append(golden_ambiguous_example(movies))
    corpus.append(golden_unanswerable_example(phones))

    # ambiguous variant with a value mention
    labels = [O, O, O, BioLabel.B_AMB, O, BioLabel.B_VAL]
    corpus.append(
        make_example(
            "what is the rating of Avatar",
            movies,
            labels,
            [
                GroundingPair(span=(3, 3), candidates=_rating_candidates(movies)),
                GroundingPair(
                    span=(5, 5),
                    candidates=((Concept(ConceptKind.VALUE, "Avatar", "Title"), 1.0),),
                ),
            ],
        )
    )
    # unanswerable variants
    corpus.append(
        make_example(
            "what is the weight of the phone",
            phones,
            [O, O, O, BioLabel.B_UNK, O, O, O],
        )
    )
    corpus.append(
        make_example(
            "what is the battery life of Xiaomi",
            phones,
            [O, O, O, BioLabel.B_UNK, BioLabel.I_UNK, O, BioLabel.B_VAL],
            [
                GroundingPair(
                    span=(6, 6),
                    candidates=((Concept(ConceptKind.VALUE, "Xiaomi", "Brand"), 1.0),),
                )
            ],
        )
    )

    # counterfactual mutations of the sports seed
    fig3 = corpus[8]
    unanswerable = make_unanswerable(fig3, cfg, random.Random(1), target_column="Score")
    assert unanswerable is not None
    corpus.append(unanswerable)
    provider = TemplateProvider(
        lexicon={"score": ("Our Score", "Opponent Score", "Score History Notes")}
    )
    ambiguous = make_ambiguous(fig3, provider, cfg, random.Random(2), target_column="Score")
    assert ambiguous is not None
    corpus.append(ambiguous)
    return corpus


DEMO_TRAIN = TrainConfig(
    learning_rate=0.5, epochs=60, batch_size=8, l2_lambda=1e-5, lr_decay=0.98, seed=7
)


def build_demo_model(corpus: list[LabeledExample] | None = None) -> CrfModel:
    corpus = corpus if corpus is not None else demo_corpus()
    featurized = [
        (featurize(ex.tokens, ex.schema, DEMO_MATCH), ex.labels) for ex in corpus
    ]
    return train(featurized, DEMO_TRAIN)


# ---------------------------------------------------------------------------
# Synthetic seed corpus
# ---------------------------------------------------------------------------

class _Family:
    def __init__(self, key: str, columns: dict[str, tuple[str, ...]], forms):
        self.key = key
        self.columns = columns
        self.forms = forms  # (question template, select column, [(cond col, op)])


_FAMILIES = [
    _Family(
        "games",
        {
            "Date": ("March 3", "April 12", "May 9", "June 21", "July 4"),
            "Opponent": ("Lakers", "Celtics", "Bulls", "Heat", "Spurs", "Hawks"),
            "Score": ("101–98", "95–92", "88–90", "110–104", "99–89"),
            "Record": ("0–2", "1–1", "2–0", "3–1", "4–2"),
            "Attendance": ("18342", "19500", "17211", "20018"),
        },
        [
            ("what is the score where record is {Record}", "Score", [("Record", "=")]),
            ("who is the opponent where score is {Score}", "Opponent", [("Score", "=")]),
            ("what is the attendance where opponent is {Opponent}", "Attendance", [("Opponent", "=")]),
            ("what is the record where opponent is {Opponent}", "Record", [("Opponent", "=")]),
        ],
    ),
    _Family(
        "players",
        {
            "Player": ("Jordan Reyes", "Casey Brooks", "Sam Okafor", "Lee Tanaka", "Ava Moreno"),
            "Team": ("Sharks", "Wolves", "Eagles", "Titans"),
            "Points per Game": ("12.4", "18.9", "21.3", "9.7"),
            "Games Played": ("58", "61", "72", "49"),
        },
        [
            ("what is the points per game of {Player}", "Points per Game", [("Player", "=")]),
            ("how many games played for {Player}", "Games Played", [("Player", "=")]),
            ("what is the team of {Player}", "Team", [("Player", "=")]),
        ],
    ),
    _Family(
        "schools",
        {
            "School": ("Lincoln High", "Riverside Academy", "Oakwood College", "Maple Grove"),
            "Location": ("Portland", "Austin", "Denver", "Madison"),
            "Number of Students": ("820", "1430", "655", "2010"),
            "Founded": ("1921", "1956", "1987", "2003"),
        },
        [
            ("what is the number of students at {School}", "Number of Students", [("School", "=")]),
            ("what is the location of {School}", "Location", [("School", "=")]),
            ("when was {School} founded", "Founded", [("School", "=")]),
        ],
    ),
    _Family(
        "employees",
        {
            "Employee": ("Maria Garcia", "John Smith", "Wei Chen", "Fatima Khan", "Igor Petrov"),
            "Department": ("Finance", "Engineering", "Marketing", "Operations"),
            "Salary": ("52000", "78000", "61500", "90000"),
            "Date of Birth": ("1990-04-02", "1985-11-17", "1978-06-30", "1995-01-23"),
        },
        [
            ("what is the salary of {Employee}", "Salary", [("Employee", "=")]),
            ("what is the date of birth of {Employee}", "Date of Birth", [("Employee", "=")]),
            ("what is the department of {Employee}", "Department", [("Employee", "=")]),
        ],
    ),
    _Family(
        "products",
        {
            "Product": ("Falcon Drone", "Aurora Lamp", "Nimbus Kettle", "Vector Mouse"),
            "Price": ("39.99", "129.00", "74.50", "19.95"),
            "Units Sold": ("410", "1225", "87", "960"),
            "Warranty": ("1 year", "2 years", "90 days"),
        },
        [
            ("what is the price of {Product}", "Price", [("Product", "=")]),
            ("how many units sold for {Product}", "Units Sold", [("Product", "=")]),
            ("what is the warranty of {Product}", "Warranty", [("Product", "=")]),
        ],
    ),
    _Family(
        "matches",
        {
            "Home Team": ("Rovers", "United", "City", "Rangers"),
            "Away Team": ("Albion", "Wanderers", "Athletic", "County"),
            "Home Score": ("2–1", "0–0", "3–2", "1–4"),
            "Away Score": ("1–2", "2–2", "0–3", "4–1"),
        },
        [
            ("what is the home score when the away team is {Away Team}", "Home Score", [("Away Team", "=")]),
            ("what is the away score when the home team is {Home Team}", "Away Score", [("Home Team", "=")]),
            ("who is the home team where home score is {Home Score}", "Home Team", [("Home Score", "=")]),
        ],
    ),
    _Family(
        "cities",
        {
            "City": ("Springfield", "Fairview", "Kingsport", "Lakeland"),
            "Country": ("Canada", "Australia", "Ireland", "Norway"),
            "Population": ("84200", "193000", "45800", "307500"),
            "Mayor": ("Dana Whitfield", "Omar Haddad", "Grace Liu", "Pedro Alves"),
        },
        [
            ("what is the population of {City}", "Population", [("City", "=")]),
            ("who is the mayor of {City}", "Mayor", [("City", "=")]),
            ("what is the country of {City}", "Country", [("City", "=")]),
        ],
    ),
    _Family(
        "albums",
        {
            "Album": ("Silver Lining", "Night Drive", "Paper Moon", "Golden Hour"),
            "Artist": ("The Hollows", "Mira Vance", "Static Bloom", "June Parker"),
            "Record Label": ("Northside", "Bluebird", "Crescent"),
            "Weeks on Chart": ("14", "23", "7", "31"),
        },
        [
            ("what is the record label of {Album}", "Record Label", [("Album", "=")]),
            ("who is the artist of {Album}", "Artist", [("Album", "=")]),
            ("how many weeks on chart for {Album}", "Weeks on Chart", [("Album", "=")]),
        ],
    ),
    _Family(
        "flights",
        {
            "Flight": ("QA118", "QA204", "QA377", "QA491"),
            "Origin": ("Lisbon", "Prague", "Nairobi", "Osaka"),
            "Destination": ("Reykjavik", "Valencia", "Montreal", "Jakarta"),
            "Departure Time": ("06:45", "11:20", "15:05", "22:40"),
        },
        [
            ("what is the destination of {Flight}", "Destination", [("Flight", "=")]),
            ("what is the departure time of {Flight}", "Departure Time", [("Flight", "=")]),
            ("what is the origin of {Flight}", "Origin", [("Flight", "=")]),
        ],
    ),
    _Family(
        "books",
        {
            "Book": ("Glass Harbor", "The Last Orchard", "Winter Census", "Iron Meadow"),
            "Author": ("N. Okonkwo", "T. Lindgren", "R. Castillo", "H. Byrne"),
            "Year of Publication": ("1998", "2004", "2011", "2019"),
            "Pages": ("312", "458", "207", "389"),
        },
        [
            ("who is the author of {Book}", "Author", [("Book", "=")]),
            ("what is the year of publication of {Book}", "Year of Publication", [("Book", "=")]),
            ("how many pages in {Book}", "Pages", [("Book", "=")]),
        ],
    ),
]


def _quote_column(name: str) -> str:
    return name if name.isidentifier() else f"`{name}`"


def build_seed_corpus(n: int, rng_seed: int) -> list[LabeledExample]:
    """Deterministic synthetic answerable seeds over the table families.

    Each seed carries its SQL and all-O placeholder labels; weak labels are
    derived at generation time. (question, table_id) pairs are unique.
    """
    rng = random.Random(rng_seed)
    instances = max(1, -(-n // 100))  # ceil
    seen: set[tuple[str, str]] = set()
    out: list[LabeledExample] = []
    attempts = 0
    while len(out) < n and attempts < 200 * n:
        attempts += 1
        family = rng.choice(_FAMILIES)
        template, select_col, conds = rng.choice(family.forms)
        values = {col: rng.choice(pool) for col, pool in family.columns.items()}
        question = template.format(**{k: v.lower() for k, v in values.items()})
        table_id = f"{family.key}-t{rng.randrange(instances)}"
        key = (question, table_id)
        if key in seen:
            continue
        seen.add(key)
        where = " AND ".join(
            f"{_quote_column(col)} {op} '{values[col]}'" for col, op in conds
        )
        sql = f"SELECT {_quote_column(select_col)} FROM t"
        if where:
            sql += f" WHERE {where}"
        schema = TableSchema(
            table_id,
            tuple(family.columns),
            {col: pool for col, pool in family.columns.items()},
        )
        out.append(_seed(question, schema, sql))
    if len(out) < n:
        raise ValueError(f"could only build {len(out)} of {n} unique seeds")
    return out


# ---------------------------------------------------------------------------
# Asset writer
# ---------------------------------------------------------------------------

def write_assets(outdir: Path, seeds: int = 200, rng_seed: int = 13) -> dict[str, Path]:
    outdir = Path(outdir)
    tables_dir = outdir / "tables"
    tables_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    for table_id, schema in golden_tables().items():
        path = tables_dir / f"{table_id}.json"
        payload = {
            "table_id": schema.table_id,
            "columns": list(schema.columns),
            "cells": {c: list(v) for c, v in schema.cells.items()},
        }
        path.write_text(json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8")
        written[f"table:{table_id}"] = path

    corpus = demo_corpus()
    corpus_path = outdir / "demo-corpus.jsonl"
    save_dataset(corpus, corpus_path)
    written["corpus"] = corpus_path

    model = build_demo_model(corpus)
    model_path = outdir / "demo-model.json"
    save_model(model, model_path)
    written["model"] = model_path

    seeds_path = outdir / "seed-corpus.jsonl"
    save_dataset(build_seed_corpus(seeds, rng_seed), seeds_path)
    written["seeds"] = seeds_path
    return written


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if not argv or argv[0] in ("-h", "--help"):
        print("usage: python -m quandary.demo OUTDIR [--seeds N]", file=sys.stderr)
        return 0 if argv else 1
    outdir = Path(argv[0])
    seeds = 200
    if "--seeds" in argv:
        seeds = int(argv[argv.index("--seeds") + 1])
    for name, path in write_assets(outdir, seeds=seeds).items():
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
