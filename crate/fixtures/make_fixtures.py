#!/usr/bin/env python3
"""Regenerate the test fixtures and their golden files.

The golden files are computed here, independently of the Rust code, so the
Rust tests can compare against them.
"""

import csv
import io
import json
import random
import re
from pathlib import Path

ROOT = Path(__file__).resolve().parent
rng = random.Random(2020)

TOPICS = [
    "Vaccines/immunology",
    "Genomics",
    "Public health Policies",
    "Epidemiology",
    "Clinical Treatment",
    "Virology",
    "Influenza",
    "Healthcare Industry",
    "Pulmonary Infections",
    "Lab Trials (human)",
]

GAZETTEER = [
    ("hydroxychloroquine", "RX009", "Medication"),
    ("hcq", "RX009", "Medication"),
    ("chloroquine", "RX010", "Medication"),
    ("ribavirin", "RX011", "Medication"),
    ("hiv protease inhibitors", "RX012", "Medication"),
    ("corticosteroids", "RX013", "Medication"),
    ("remdesivir", "RX014", "Medication"),
    ("lopinavir", "RX015", "Medication"),
    ("interferon beta", "RX016", "Medication"),
    ("tocilizumab", "RX017", "Medication"),
    ("azithromycin", "RX018", "Medication"),
    ("pneumonia", "MC001", "MedicalCondition", "Diagnosis"),
    ("fever", "MC002", "MedicalCondition", "Sign,Symptom"),
    ("cough", "MC003", "MedicalCondition", "Symptom"),
    ("acute respiratory distress syndrome", "MC004", "MedicalCondition", "Diagnosis"),
    ("ards", "MC004", "MedicalCondition", "Diagnosis"),
    ("middle east respiratory syndrome coronavirus", "MC005", "MedicalCondition", "Diagnosis"),
    ("severe acute respiratory syndrome", "MC006", "MedicalCondition", "Diagnosis"),
    ("sars", "MC006", "MedicalCondition", "Diagnosis"),
    ("sepsis", "MC007", "MedicalCondition", "Diagnosis"),
    ("anosmia", "MC008", "MedicalCondition", "Symptom"),
    ("myocarditis", "MC009", "MedicalCondition", "Diagnosis"),
    ("lung", "AN001", "Anatomy"),
    ("upper respiratory tract", "AN002", "Anatomy"),
    ("saliva", "AN003", "Anatomy"),
    ("kidney", "AN004", "Anatomy"),
    ("rt pcr", "TP001", "TestTreatmentProcedure"),
    ("mechanical ventilation", "TP002", "TestTreatmentProcedure"),
    ("chest ct", "TP003", "TestTreatmentProcedure"),
    ("plasma therapy", "TP004", "TestTreatmentProcedure"),
]
assert len(GAZETTEER) == 30

# Hand-written articles carrying the facts the search tests rely on.
HAND = [
    dict(
        doc_id="fx001",
        title="Incubation period of the novel coronavirus: a pooled analysis",
        abstract="We pooled case reports to estimate the incubation period. The virus had a median "
        "incubation period of 5-6 days, with a range of 2 to 14 days. Fever and cough were the "
        "most common first symptoms.",
        body=[
            "Exposure windows were reconstructed from travel histories. Most patients developed fever "
            "within one week. The incubation period of the virus was estimated with a lognormal model. "
            "Quarantine of 14 days covers nearly all infections.",
            "Sensitivity analyses excluded clusters. Results were stable across age groups.",
        ],
        authors=["Li, Q.", "Guan, X."],
        institutions=["Wuhan CDC"],
        topics=["Epidemiology", "Virology"],
        date="2020-01-29",
        cites=[],
    ),
    dict(
        doc_id="fx002",
        title="Treatment lessons from the 2002 SARS outbreak",
        abstract="During the 2002 SARS outbreak treatment included ribavirin, HIV protease inhibitors, "
        "corticosteroids. Outcomes were mixed and no randomized trial was completed.",
        body=[
            "Ribavirin was given widely despite weak in vitro activity. Corticosteroids reduced fever "
            "but may have delayed viral clearance. Lopinavir combined with ritonavir showed benefit in "
            "an open label study.",
        ],
        authors=["Stockman, L. J."],
        institutions=["Centers for Disease Control and Prevention"],
        topics=["Clinical Treatment"],
        date="2006-09",
        cites=["fx001"],
    ),
    dict(
        doc_id="fx003",
        title="Salivary viral load in COVID-19 patients",
        abstract="Saliva samples were collected daily. Salivary viral load was highest during the first "
        "week after symptom onset and declined over time.",
        body=[
            "Posterior oropharyngeal saliva was tested by RT PCR. Viral load peaked at presentation. "
            "The salivary viral load is highest in the first week. Older age correlated with higher "
            "viral load.",
            "Serial sampling showed prolonged shedding in 33% of patients. Saliva is a practical "
            "specimen for screening.",
        ],
        authors=["To, K. K.", "Yuen, K. Y."],
        institutions=["University of Hong Kong"],
        topics=["Virology", "Lab Trials (human)"],
        date="2020-03-23",
        cites=["fx001"],
    ),
    dict(
        doc_id="fx004",
        title="Hydroxychloroquine and azithromycin as a treatment of COVID-19",
        abstract="Patients received hcq with or without azithromycin. Hydroxychloroquine treatment was "
        "associated with viral load reduction. Chloroquine was not tested.",
        body=[
            "Twenty patients were treated with hcq. Viral clearance by day 6 was higher in the treated "
            "group. The study was small and not randomized.",
        ],
        authors=["Gautret, P.", "Raoult, D."],
        institutions=["IHU Mediterranee Infection"],
        topics=["Clinical Treatment", "Lab Trials (human)"],
        date="2020-03-20",
        cites=["fx002"],
    ),
    dict(
        doc_id="fx005",
        title="Chloroquine is a potent inhibitor of coronavirus infection in vitro",
        abstract="Chloroquine and hydroxychloroquine inhibited viral entry in cell culture. "
        "Hydroxychloroquine was more potent than chloroquine.",
        body=[],
        authors=["Vincent, M. J."],
        institutions=["Centers for Disease Control and Prevention"],
        topics=["Virology"],
        date="2005-08-22",
        cites=[],
    ),
    dict(
        doc_id="fx006",
        title="Remdesivir for the treatment of hospitalized adults",
        abstract="Remdesivir shortened time to recovery in adults hospitalized with pneumonia. "
        "Mechanical ventilation at baseline reduced the benefit.",
        body=[
            "The trial enrolled 1063 patients. Median recovery was 11 days with remdesivir and 15 days "
            "with placebo. Serious adverse events were less frequent in the remdesivir group.",
        ],
        authors=["Beigel, J. H."],
        institutions=["National Institutes of Health"],
        topics=["Clinical Treatment", "Lab Trials (human)"],
        date="2020-05-22",
        cites=["fx004"],
    ),
    dict(
        doc_id="fx007",
        title="Community mitigation policies and school closures",
        abstract="School closures and social distancing reduced transmission in modeled cities. "
        "Policies combining several measures were most effective.",
        body=[
            "We simulated interventions in a synthetic population. Closing schools for 8 weeks reduced "
            "peak incidence by 40%. Earlier action produced larger benefits.",
        ],
        authors=["Ferguson, N. M."],
        institutions=["Imperial College London"],
        topics=["Public health Policies", "Epidemiology"],
        date="2020-03-16",
        cites=[],
    ),
    dict(
        doc_id="fx008",
        title="Genomic characterisation of a novel coronavirus from bats",
        abstract="The genome sequence shared 96% identity with a bat coronavirus. Phylogenetic analysis "
        "placed the virus in the sarbecovirus lineage.",
        body=[
            "Next generation sequencing recovered the full genome. The spike protein receptor binding "
            "domain resembled that of SARS. Bats are the likely reservoir.",
        ],
        authors=["Lu, R.", "Tan, W."],
        institutions=["Chinese Center for Disease Control and Prevention"],
        topics=["Genomics", "Virology"],
        date="2020-02-22",
        cites=["fx005", "fx999"],
    ),
    dict(
        doc_id="fx009",
        title="An mRNA vaccine candidate against the novel coronavirus",
        abstract="A lipid nanoparticle mRNA vaccine induced neutralizing antibody responses. Two doses "
        "given 28 days apart were well tolerated.",
        body=[
            "Volunteers received 25, 100 or 250 micrograms. Fever occurred after the second dose in some "
            "participants. Antibody titers exceeded those of convalescent plasma.",
        ],
        authors=["Jackson, L. A."],
        institutions=["Kaiser Permanente Washington"],
        topics=["Vaccines/immunology", "Lab Trials (human)"],
        date="2020-07-14",
        cites=[],
    ),
    dict(
        doc_id="fx010",
        title="Seasonal influenza and coronavirus coinfection",
        abstract="Coinfection with influenza was found in a minority of patients. Oseltamivir did not "
        "change outcomes. Pneumonia was more severe with coinfection.",
        body=[],
        authors=["Kim, D."],
        institutions=["Stanford University"],
        topics=["Influenza", "Pulmonary Infections"],
        date="2020-04-15",
        cites=["fx006"],
    ),
    dict(
        doc_id="fx011",
        title="Acute respiratory distress syndrome in critically ill patients",
        abstract="Acute respiratory distress syndrome developed in 41% of intensive care patients. "
        "Mechanical ventilation was required in most cases. Sepsis was a frequent complication.",
        body=[
            "Prone positioning improved oxygenation. ARDS mortality was 52%. Patients with ARDS stayed "
            "in intensive care for a median of 10 days.",
        ],
        authors=["Wu, C."],
        institutions=["Wuhan Jinyintan Hospital"],
        topics=["Pulmonary Infections", "Clinical Treatment"],
        date="2020-03-13",
        cites=["fx001", "fx006"],
    ),
    dict(
        doc_id="fx012",
        title="Hospital capacity and the healthcare workforce during the pandemic",
        abstract="Hospitals expanded intensive care capacity by converting wards. Staff shortages "
        "limited surge capacity in 30% of facilities.",
        body=[],
        authors=["Emanuel, E. J."],
        institutions=["University of Pennsylvania"],
        topics=["Healthcare Industry", "Public health Policies"],
        date="2020-03-23",
        cites=[],
    ),
]

THEME_SENTENCES = {
    "Vaccines/immunology": [
        "Neutralizing antibody titers rose after the second dose.",
        "The vaccine candidate elicited T cell responses in mice.",
        "Adjuvanted formulations improved immunogenicity in older adults.",
        "Interferon beta signaling shaped the early immune response.",
    ],
    "Genomics": [
        "Whole genome sequencing identified 12 mutations.",
        "Phylogenetic trees suggested a single introduction.",
        "The spike gene showed signatures of positive selection.",
        "Recombination was detected between related strains.",
    ],
    "Public health Policies": [
        "Travel restrictions delayed the epidemic peak by 3 days.",
        "Mask mandates were associated with fewer hospitalizations.",
        "Contact tracing capacity limited the effect of testing.",
        "Stay at home orders reduced mobility by 50%.",
    ],
    "Epidemiology": [
        "The basic reproduction number was estimated at 2.5.",
        "The serial interval averaged 4 to 5 days.",
        "Attack rates were highest in household contacts.",
        "Case fatality varied strongly with age.",
    ],
    "Clinical Treatment": [
        "Patients received tocilizumab after respiratory decline.",
        "Early corticosteroids reduced mortality in ventilated patients.",
        "Plasma therapy was given to 39 patients.",
        "Lopinavir showed no benefit over standard care.",
    ],
    "Virology": [
        "The virus binds the ACE2 receptor through its spike protein.",
        "Viral replication peaked 48 hours after infection in cell culture.",
        "Shedding from the upper respiratory tract lasted 20 days.",
        "Electron microscopy showed crown shaped particles.",
    ],
    "Influenza": [
        "Influenza vaccination coverage was 45% among adults.",
        "Oseltamivir shortened illness by 1 day.",
        "Influenza seasons overlapped with the first wave.",
        "Hemagglutinin drift reduced vaccine effectiveness.",
    ],
    "Healthcare Industry": [
        "Elective procedures were postponed in most hospitals.",
        "Supply chains for protective equipment were disrupted.",
        "Telemedicine visits increased tenfold.",
        "Hospital revenue fell during the first months.",
    ],
    "Pulmonary Infections": [
        "Chest CT showed bilateral ground glass opacities.",
        "Pneumonia was the most common diagnosis at admission.",
        "Lung injury persisted for months in some survivors.",
        "Secondary bacterial pneumonia complicated 10% of cases.",
    ],
    "Lab Trials (human)": [
        "Participants were randomized to treatment or placebo.",
        "The trial enrolled 200 volunteers across 5 sites.",
        "Samples were tested by RT PCR every 48 hours.",
        "The primary endpoint was time to clinical improvement.",
    ],
}

SUBJECTS = [
    "cohort", "survey", "surveillance", "modeling", "registry", "meta analysis", "case series",
    "cross sectional", "retrospective", "prospective",
]
PLACES = ["Italy", "Korea", "Brazil", "Germany", "India", "Canada", "Spain", "Japan", "Iran", "Chile"]
AUTHORS = [f"Researcher, {c}." for c in "ABCDEFGHIJKLMNOP"]
INSTITUTIONS = [f"Institute of Health {i}" for i in range(1, 9)]


def generated(i):
    doc_id = f"fx{i:03d}"
    main = rng.choice(TOPICS)
    topics = {main}
    if rng.random() < 0.4:
        topics.add(rng.choice(TOPICS))
    subject = rng.choice(SUBJECTS)
    place = rng.choice(PLACES)
    title = f"A {subject} of {main.split('/')[0].split(' (')[0].lower()} in {place} number {i}"
    pool = [s for t in sorted(topics) for s in THEME_SENTENCES[t]]
    abstract = " ".join(rng.sample(pool, 3))
    body = []
    if rng.random() < 0.5:
        body = [" ".join(rng.sample(pool, min(len(pool), 4))) for _ in range(2)]
    earlier = [f"fx{j:03d}" for j in range(1, i)]
    cites = sorted(rng.sample(earlier, rng.randint(0, 2)))
    return dict(
        doc_id=doc_id,
        title=title,
        abstract=abstract,
        body=body,
        authors=rng.sample(AUTHORS, rng.randint(1, 3)),
        institutions=[rng.choice(INSTITUTIONS)],
        topics=sorted(topics),
        date=f"2020-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}",
        cites=cites,
    )


ARTICLES = HAND + [generated(i) for i in range(len(HAND) + 1, 51)]
assert len(ARTICLES) == 50

# Rows the loader must reject or drop, appended after the 50 good rows.
BAD_ROWS = [
    # duplicate doc id: the first occurrence wins
    ["fx004", "A different title for a reused id", "", "Someone, A.", "2020-01-01", "", "", "test"],
    # same normalized title as fx001 under a larger id
    ["fx900", "INCUBATION period of the novel coronavirus -- a pooled analysis!", "", "", "2020-02-02", "", "", "test"],
    # same normalized title as fx012 under a smaller id, which wins
    ["aa001", "Hospital capacity and the healthcare workforce during the pandemic.", "Earlier preprint on hospital capacity.", "Emanuel, E. J.", "2020-02-12", "", "", "medrxiv"],
    # empty title
    ["fx901", "   ", "no title here", "", "2020-01-01", "", "", "test"],
    # invalid date
    ["fx902", "A study with a malformed date", "", "", "2020-13-45", "", "", "test"],
    # empty id
    ["", "A study without an id", "", "", "2020-01-01", "", "", "test"],
]
MALFORMED_LINE = "fx903,only three,fields\n"

HEADER = ["cord_uid", "title", "abstract", "authors", "publish_time", "institutions", "cited_doc_ids", "source_x"]


def write_corpus():
    d = ROOT / "corpus"
    (d / "fulltext").mkdir(parents=True, exist_ok=True)
    for old in (d / "fulltext").glob("*.json"):
        old.unlink()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for a in ARTICLES:
        w.writerow([
            a["doc_id"], a["title"], a["abstract"], "; ".join(a["authors"]), a["date"],
            "; ".join(a["institutions"]), "; ".join(a["cites"] + ([a["doc_id"]] if a["doc_id"] == "fx007" else [])),
            "fixture",
        ])
    for r in BAD_ROWS[:3]:
        w.writerow(r)
    text = buf.getvalue() + MALFORMED_LINE
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in BAD_ROWS[3:]:
        w.writerow(r)
    text += buf.getvalue()
    (d / "metadata.csv").write_text(text)
    for a in ARTICLES:
        if a["body"]:
            doc = {"doc_id": a["doc_id"], "body_text": [{"text": p} for p in a["body"]]}
            (d / "fulltext" / f"{a['doc_id']}.json").write_text(json.dumps(doc, indent=2))
    # a file that is not valid full text is skipped
    (d / "fulltext" / "broken.json").write_text("{ not json")


def norm_title(t):
    out = []
    for word in t.split():
        w = "".join(c.lower() for c in word if c.isalnum())
        if w:
            out.append(w)
    return " ".join(out)


def valid_date(s):
    if re.fullmatch(r"\d{4}", s):
        return True
    m = re.fullmatch(r"(\d{4})-(\d{2})(?:-(\d{2}))?", s)
    if not m:
        return False
    month = int(m.group(2))
    if not 1 <= month <= 12:
        return False
    if m.group(3) is None:
        return True
    import datetime
    try:
        datetime.date(int(m.group(1)), month, int(m.group(3)))
        return True
    except ValueError:
        return False


def golden_listing():
    """Independent re-parse of metadata.csv with Python's csv module."""
    rows = list(csv.reader(open(ROOT / "corpus" / "metadata.csv", newline="")))
    header = rows[0]
    skipped = 0
    by_id = {}
    dropped = []
    for r in rows[1:]:
        if len(r) != len(header):
            skipped += 1
            continue
        rec = dict(zip(header, (x.strip() for x in r)))
        if not rec["cord_uid"] or not norm_title(rec["title"]):
            skipped += 1
            continue
        if rec["publish_time"] and not valid_date(rec["publish_time"]):
            skipped += 1
            continue
        if rec["cord_uid"] in by_id:
            dropped.append({"doc_id": rec["cord_uid"], "duplicate_of": rec["cord_uid"]})
            continue
        by_id[rec["cord_uid"]] = rec
    keep = {}
    for doc_id in sorted(by_id):
        key = norm_title(by_id[doc_id]["title"])
        if key in keep:
            dropped.append({"doc_id": doc_id, "duplicate_of": keep[key]})
        else:
            keep[key] = doc_id
    bodies = {a["doc_id"]: "\n".join(a["body"]) for a in ARTICLES}
    retained = []
    for doc_id in sorted(keep.values()):
        rec = by_id[doc_id]
        split = lambda s: [x.strip() for x in s.split(";") if x.strip()]
        cites = []
        for c in split(rec["cited_doc_ids"]):
            if c != doc_id and c not in cites:
                cites.append(c)
        retained.append({
            "doc_id": doc_id,
            "title": rec["title"],
            "abstract": rec["abstract"],
            "body": bodies.get(doc_id, "") if doc_id.startswith("fx") else "",
            "authors": split(rec["authors"]),
            "institutions": split(rec["institutions"]),
            "cited_doc_ids": cites,
            "publish_date": rec["publish_time"] or None,
            "source": rec["source_x"],
        })
    return {"retained": retained, "skipped_rows": skipped, "dropped_duplicates": dropped}


def tokens(text):
    return [(m.group(0).lower(), m.start(), m.end()) for m in re.finditer(r"[A-Za-z0-9]+", text)]


def sentences(text):
    spans = []
    start = None
    i = 0
    while i < len(text):
        c = text[i]
        if start is None and not c.isspace():
            start = i
        if c in ".!?":
            j = i + 1
            while j < len(text) and text[j].isspace():
                j += 1
            if j > i + 1 and j < len(text) and (text[j].isupper() or text[j].isdigit()):
                if start is not None:
                    spans.append((start, i + 1))
                    start = None
                i = j
                continue
        i += 1
    if start is not None:
        end = len(text[:].rstrip())
        if end > start:
            spans.append((start, end))
    return spans


def extract(text, gaz, max_n):
    out = []
    for s, e in sentences(text):
        toks = tokens(text[s:e])
        i = 0
        while i < len(toks):
            for n in range(min(max_n, len(toks) - i), 0, -1):
                key = " ".join(t[0] for t in toks[i:i + n])
                if key in gaz:
                    out.append(gaz[key])
                    i += n
                    break
            else:
                i += 1
    return out


def write_gazetteer():
    lines = ["# surface\tcanonical_id\tcategory\ttraits"]
    for row in GAZETTEER:
        lines.append("\t".join(row))
    (ROOT / "gazetteer.tsv").write_text("\n".join(lines) + "\n")
    max_n = max(len(tokens(r[0])) for r in GAZETTEER)
    return {"rows": len(GAZETTEER), "max_ngram": max_n}


def kg_counts(listing, gaz_stats):
    """Hand enumeration of the graph over the first 20 retained articles."""
    gaz = {" ".join(t[0] for t in tokens(r[0])): (r[1], r[2]) for r in GAZETTEER}
    arts = listing["retained"][:20]
    ids = {a["doc_id"] for a in arts}
    topics = {a["doc_id"]: a["topics"] for a in ARTICLES}
    authors, insts, tops, ents = set(), set(), set(), set()
    triples = {"authored_by": set(), "affiliated_with": set(), "cites": set(), "has_topic": set(), "mentions": set()}
    dangling = 0
    for a in arts:
        d = a["doc_id"]
        for x in a["authors"]:
            authors.add(norm_title(x))
            triples["authored_by"].add((d, norm_title(x)))
        for x in a["institutions"]:
            insts.add(norm_title(x))
            triples["affiliated_with"].add((d, norm_title(x)))
        for t in topics.get(d, []):
            tops.add(t)
            triples["has_topic"].add((d, t))
        full = a["title"] + "\n" + a["abstract"] + "\n" + a["body"]
        for cid, _ in extract(full, gaz, gaz_stats["max_ngram"]):
            ents.add(cid)
            triples["mentions"].add((d, cid))
        for c in a["cited_doc_ids"]:
            if c in ids:
                triples["cites"].add((d, c))
            else:
                dangling += 1
    return {
        "doc_ids": [a["doc_id"] for a in arts],
        "nodes": {
            "article": len(arts),
            "author": len(authors),
            "institution": len(insts),
            "topic": len(tops),
            "entity": len(ents),
        },
        "triples": {k: len(v) for k, v in triples.items()},
        "dangling_citations": dangling,
    }


def golden_passages(listing, doc_id, window=3, stride=2):
    a = next(x for x in listing["retained"] if x["doc_id"] == doc_id)
    out = []
    for section in ("title", "abstract"):
        text = a[section]
        if text.strip():
            start = len(text) - len(text.lstrip())
            out.append({"section": section, "char_start": start, "char_end": start + len(text.strip())})
    spans = sentences(a["body"])
    first = 0
    while first < len(spans):
        last = min(first + window, len(spans)) - 1
        out.append({"section": "body", "char_start": spans[first][0], "char_end": spans[last][1]})
        if last + 1 == len(spans):
            break
        first += stride
    for i, p in enumerate(out):
        p["passage_index"] = i
        p["text"] = a[p["section"]][p["char_start"]:p["char_end"]]
    return out


FAQ = [
    {
        "question": "What is the incubation period of COVID-19?",
        "answer": "Most estimates place it between 2 and 14 days, with a median of about 5 days.",
    },
    {
        "question": "How does the coronavirus spread between people?",
        "answer": "Mainly through respiratory droplets and aerosols during close contact.",
    },
    {
        "question": "Should healthy people wear masks in public?",
        "answer": "Masks reduce transmission and are recommended where distancing is hard.",
    },
]


def main():
    write_corpus()
    listing = golden_listing()
    gaz_stats = write_gazetteer()
    golden = ROOT / "golden"
    golden.mkdir(exist_ok=True)
    (golden / "corpus_listing.json").write_text(json.dumps(listing, indent=2) + "\n")
    (golden / "gazetteer_stats.json").write_text(json.dumps(gaz_stats, indent=2) + "\n")
    (golden / "kg_counts.json").write_text(json.dumps(kg_counts(listing, gaz_stats), indent=2) + "\n")
    (golden / "passages_fx001.json").write_text(json.dumps(golden_passages(listing, "fx001"), indent=2) + "\n")
    doc_topics = {a["doc_id"]: a["topics"] for a in ARTICLES}
    (ROOT / "doc_topics.json").write_text(json.dumps(doc_topics, indent=2, sort_keys=True) + "\n")
    (ROOT / "faq.json").write_text(json.dumps(FAQ, indent=2) + "\n")


if __name__ == "__main__":
    main()
