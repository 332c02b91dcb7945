#!/usr/bin/env python3
"""Generate the bundled fixture corpus and the sanity question set.

Writes data/corpus/*.xml, data/abbrev.tsv, data/units.tsv and
data/sanity_questions.jsonl. Answer offsets are computed on the normalized
body, so the normalization below must stay in step with the Rust one.
"""

import json
import random
import re
from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

ROOT = Path(__file__).resolve().parent.parent / "data"

ABBREVS = [
    ("ENG", "engine"),
    ("ALT", "altitude"),
    ("QTY", "quantity"),
    ("TEMP", "temperature"),
    ("PRESS", "pressure"),
    ("L/G", "landing gear"),
    ("HYD", "hydraulic"),
    ("ELEC", "electrical"),
    ("FLT", "flight"),
    ("CTL", "control"),
    ("A/THR", "autothrust"),
    ("FWD", "forward"),
]

# (pattern, replacement) in Rust regex syntax
UNITS = [
    (r"(\d),(\d{3})(\D|$)", "${1}${2}${3}"),
    (r"(\d)\s*(KTS|KT|kts|kt)\b", "${1} kt"),
    (r"(\d)\s*(FT|ft|feet)\b", "${1} ft"),
    (r"(\d)\s*°\s*C\b", "${1} °C"),
]

STOPWORDS = set(
    """a about after all am an and any are as at be been before being by can could did do does during for from
    had has have how i if in into is it its me must my of on or our shall should so than that the their them then
    there these this those to us was we were what when where which while who whom why will with would you your""".split()
)


def py_repl(rep):
    return re.sub(r"\$\{(\d+)\}", r"\\g<\1>", rep)


def normalize(raw):
    keys = sorted(ABBREVS, key=lambda kv: (-len(kv[0]), kv[0]))
    out, i = [], 0
    while i < len(raw):
        hit = None
        if i == 0 or not raw[i - 1].isalnum():
            for k, v in keys:
                end = i + len(k)
                if raw[i:end] == k and (end == len(raw) or not raw[end].isalnum()):
                    hit = (k, v)
                    break
        if hit:
            out.append(hit[1])
            i += len(hit[0])
        else:
            out.append(raw[i])
            i += 1
    text = "".join(out)
    for pat, rep in UNITS:
        text = re.sub(pat, py_repl(rep), text)
    return text


TOKEN = re.compile(r"\d+(?:\.\d+)?|[^\W_]+|[^\w\s]|_", re.UNICODE)


def tokens(text):
    return TOKEN.findall(text)


def clauses(text):
    for line in text.split("\n"):
        for c in re.split(r"[;!?]|(?<!\d)\.|\.(?!\d)", line):
            if c.strip():
                yield c.strip()


def content_terms(q):
    return {t.lower() for t in tokens(q) if (t[0].isalnum()) and t.lower() not in STOPWORDS}


# (doc, question, raw answer clause); the raw clause goes into the doc
FACTS = [
    ("LIM-01", "What is max crosswind for landing?", "Max crosswind for landing: 38KT gust included"),
    ("LIM-01", "What is the max tailwind for takeoff and landing?", "Max tailwind for takeoff and landing: 10KT"),
    ("LIM-02", "What is VFE in CONF 3?", None),
    ("HYD-01", "What does the yellow electric pump pressurize on ground?",
     "The yellow electric pump can pressurize the yellow system on ground"),
    ("ENG-01", "What is the EGT limit for engine start?", "EGT limit for ENG start is 725°C"),
    ("APU-01", "What is the maximum altitude for APU start?", "APU start maximum ALT: 41,000FT"),
    ("ELEC-01", "What is the battery endurance on the essential busbars?",
     "Battery endurance on the essential busbars is about 30 minutes"),
    ("FUEL-01", "What is the minimum fuel quantity for takeoff?", "Minimum fuel QTY for takeoff is 1500 kg"),
    ("FUEL-02", "When does the center tank pump stop automatically?",
     "Each center tank pump will stop automatically 5 minutes after low level"),
    ("GEAR-01", "What is the maximum speed with landing gear extended?", "VLE, maximum speed with L/G extended: 280KT"),
    ("GEAR-02", "What is the number of handcrank turns for gravity extension?",
     "The number of handcrank turns for gravity extension is 3"),
    ("FCTL-01", "Which protections are lost in direct law?", "All protections are lost in direct law"),
    ("ICE-01", "When must engine anti ice be set on?", "ENG anti ice must be set ON when icing conditions are expected"),
    ("COND-01", "What is the cabin altitude warning threshold?", "The cabin ALT warning threshold is 9,550FT"),
    ("FIRE-01", "What is the number of fire extinguisher bottles per engine?",
     "The number of fire extinguisher bottles per ENG is two"),
    ("OXY-01", "What is the minimum crew oxygen bottle pressure for dispatch?",
     "Minimum crew oxygen bottle PRESS for dispatch: 1000 PSI"),
    ("NAV-01", "What is the IRS alignment time?", "IRS alignment time is approximately 10 minutes"),
    ("DOOR-01", "What is the maximum wind for cargo door operation?", "Maximum wind for cargo door operation is 40KT"),
    ("ENG-02", "What is the minimum engine oil quantity before start?", "Minimum ENG oil QTY before start is 9.5 qt"),
    ("ENG-02", "What is the maximum continuous engine oil temperature?", "Maximum continuous ENG oil TEMP: 155°C"),
]
VFE_ANSWER = "CONF 3 — VFE: 185 kt"

DOCS = [
    # id, ata, title, subject nouns used by the filler
    ("LIM-01", "00-10", "Wind limitations", ["runway", "wind component", "gust"]),
    ("LIM-02", "00-20", "Speed limitations", ["flap lever", "slat", "airspeed indication"]),
    ("LIM-03", "00-30", "Weight limitations", ["zero fuel weight", "ramp weight", "load sheet"]),
    ("HYD-01", "29-10", "Hydraulic power generation", ["green system", "blue system", "reservoir"]),
    ("HYD-02", "29-20", "HYD system low PRESS", ["accumulator", "priority valve", "PTU"]),
    ("ENG-01", "70-10", "Engine start", ["starter valve", "ignition", "N2"]),
    ("ENG-02", "79-00", "Engine oil system description", ["oil pump", "scavenge filter", "chip detector"]),
    ("ENG-03", "70-20", "Engine relight in flight", ["windmilling", "starter assist", "relight envelope"]),
    ("ENG-04", "70-30", "Engine shutdown", ["master switch", "cooling period", "thrust lever"]),
    ("APU-01", "49-10", "APU start and operation", ["APU master switch", "APU generator", "exhaust"]),
    ("APU-02", "49-20", "APU bleed", ["bleed valve", "load compressor", "duct"]),
    ("ELEC-01", "24-10", "Electrical emergency configuration", ["emergency generator", "static inverter", "RAT"]),
    ("ELEC-02", "24-20", "AC and DC distribution", ["bus tie", "transformer rectifier", "galley shed"]),
    ("FUEL-01", "28-10", "Fuel quantity and loading", ["refuel panel", "tank gauge", "fuel density"]),
    ("FUEL-02", "28-20", "Fuel pumps and transfer", ["wing tank", "transfer valve", "crossfeed"]),
    ("FUEL-03", "28-30", "Fuel imbalance", ["lateral balance", "outer tank", "fuel used"]),
    ("GEAR-01", "32-10", "Landing gear operation", ["gear lever", "uplock", "door actuator"]),
    ("GEAR-02", "32-20", "Landing gear gravity extension", ["handcrank", "freefall", "gear indication"]),
    ("BRK-01", "32-40", "Brakes and antiskid", ["autobrake", "accumulator pressure", "tachometer"]),
    ("BRK-02", "32-50", "Nose wheel steering", ["tiller", "steering handwheel", "towing"]),
    ("FCTL-01", "27-10", "FLT CTL laws", ["normal law", "alternate law", "sidestick"]),
    ("FCTL-02", "27-20", "Flaps and slats", ["flap lever", "wingtip brake", "SFCC"]),
    ("FCTL-03", "27-30", "Speedbrakes and spoilers", ["spoiler", "ground spoiler", "speedbrake lever"]),
    ("ICE-01", "30-10", "Ice and rain protection", ["wing anti ice", "probe heat", "wiper"]),
    ("COND-01", "21-10", "Cabin pressurization", ["outflow valve", "safety valve", "landing elevation"]),
    ("COND-02", "21-20", "Air conditioning packs", ["pack valve", "mixer unit", "trim air"]),
    ("FIRE-01", "26-10", "Engine fire protection", ["fire pushbutton", "agent discharge", "fire loop"]),
    ("FIRE-02", "26-20", "Cargo smoke detection", ["smoke detector", "cargo isolation valve", "extinguisher"]),
    ("OXY-01", "35-10", "Crew oxygen", ["oxygen mask", "mask regulator", "bottle"]),
    ("OXY-02", "35-20", "Passenger oxygen", ["chemical generator", "mask door", "cabin altitude"]),
    ("NAV-01", "34-10", "Inertial reference alignment", ["ADIRU", "present position", "mode selector"]),
    ("NAV-02", "34-20", "Radio navigation", ["VOR", "ILS receiver", "DME"]),
    ("NAV-03", "34-30", "Weather radar", ["radar tilt", "gain knob", "turbulence mode"]),
    ("COM-01", "23-10", "Radio management", ["RMP", "VHF", "transponder"]),
    ("DOOR-01", "52-10", "Cargo doors", ["door handle", "yellow hand pump", "door sill"]),
    ("DOOR-02", "52-20", "Passenger doors and slides", ["escape slide", "girt bar", "door arming lever"]),
    ("LGT-01", "33-10", "Exterior lighting", ["landing light", "strobe", "beacon"]),
    ("AFS-01", "22-10", "A/THR operation", ["thrust lever", "A/THR pushbutton", "FMA"]),
    ("AFS-02", "22-20", "Autopilot engagement", ["AP pushbutton", "flight director", "FCU"]),
    ("WB-01", "08-10", "Loading and balance", ["center of gravity", "trim sheet", "ballast"]),
]

FILLER = [
    "Check that the {x} indications are normal on the system display",
    "Monitor the {x} during the whole flight phase and report any deviation",
    "If the {x} is not available, refer to the relevant abnormal procedure",
    "The {x} is controlled by two independent computers",
    "Maintenance action on the {x} is required before the next departure",
    "The crew confirms the {x} status before selecting any action",
    "A caution message is displayed when the {x} reaches its threshold",
    "Select the {x} OFF only on request of the checklist",
    "The {x} position is shown on the overhead panel",
    "Do not operate the {x} with the associated circuit breaker pulled",
    "When the {x} fails, the other channel takes over without crew action",
    "The {x} logic is inhibited during critical flight phases",
    "Record the {x} values in the technical log",
    "After a reset, allow two minutes for the {x} to resume normal operation",
    "Cross check the {x} data with the second crew member",
    "The {x} automatically returns to normal mode after the test",
]

NOTES = [
    "Operators may publish additional restrictions",
    "This procedure applies to all engine types unless otherwise stated",
    "Read the complete procedure before starting",
    "Inform the cabin crew if the situation affects the cabin",
]


def filler_sentence(rng, subjects):
    return rng.choice(FILLER).format(x=rng.choice(subjects)) + "."


def section(rng, header, subjects, n_steps, fact=None, fact_at=None):
    steps = [filler_sentence(rng, subjects) for _ in range(n_steps)]
    if fact is not None:
        steps.insert(fact_at if fact_at is not None else rng.randrange(len(steps) + 1), fact + ".")
    body = "".join(f"      <step>{escape(s)}</step>\n" for s in steps)
    return f"    <section>\n      <header>{escape(header)}</header>\n{body}    </section>\n"


HEADERS = ["General", "Description", "Controls and indicators", "Normal operation", "Abnormal operation",
           "Crew actions", "System monitoring", "Maintenance information"]


def build_doc(rng, doc_id, ata, title, subjects, facts):
    parts = [f'  <procedure id={quoteattr(doc_id)} ata={quoteattr(ata)} applicability="A320 family">\n',
             f"    <title>{escape(title)}</title>\n"]
    long_doc = doc_id == "ENG-02"
    n_sections = 26 if long_doc else rng.randint(2, 3)
    headers = [HEADERS[i % len(HEADERS)] + (f" {i // len(HEADERS) + 1}" if i >= len(HEADERS) else "")
               for i in range(n_sections)]
    # facts go into distinct sections; in the long document deep inside
    slots = {}
    if long_doc:
        slots = {15: facts[0], 21: facts[1]}
    else:
        for f, s in zip(facts, rng.sample(range(n_sections), len(facts))):
            slots[s] = f
    for i, h in enumerate(headers):
        n_steps = rng.randint(9, 11) if long_doc else rng.randint(4, 6)
        parts.append(section(rng, h, subjects, n_steps, slots.get(i)))
    if doc_id == "LIM-02":
        rows = [("CONF 1", "230 kt"), ("CONF 1+F", "215 kt"), ("CONF 2", "200 kt"), ("CONF 3", "185 kt"),
                ("CONF FULL", "177 kt")]
        cells = "".join(f"      <row><cell>{escape(a)}</cell><cell>{escape(b)}</cell></row>\n" for a, b in rows)
        parts.append("    <table>\n      <caption>Maximum flap extended speeds</caption>\n"
                     "      <head><cell>Configuration</cell><cell>VFE</cell></head>\n" + cells + "    </table>\n")
    if rng.random() < 0.5:
        parts.append(f"    <note>{escape(rng.choice(NOTES))}.</note>\n")
    parts.append("  </procedure>\n")
    return "".join(parts)


def doc_body(xml_fragment):
    """Body text the way the ingester assembles it (blocks joined by newlines)."""
    blocks = []
    for m in re.finditer(r"<(header|step|note|caption|row)>(.*?)</\1>", xml_fragment, re.S):
        tag, inner = m.group(1), m.group(2)
        if tag == "row":
            a, b = re.findall(r"<cell>(.*?)</cell>", inner)
            blocks.append(f"{a} — VFE: {b}")
        else:
            blocks.append(inner)
    from xml.sax.saxutils import unescape
    return "\n".join(" ".join(unescape(b).split()) for b in blocks)


def main():
    rng = random.Random(7)
    facts_by_doc = {}
    for doc, q, raw in FACTS:
        if raw is not None:
            facts_by_doc.setdefault(doc, []).append(raw)

    files = {}
    bodies = {}
    for doc_id, ata, title, subjects in DOCS:
        frag = build_doc(rng, doc_id, ata, title, subjects, facts_by_doc.get(doc_id, []))
        chapter = ata.split("-")[0]
        files.setdefault(chapter, []).append(frag)
        bodies[doc_id] = normalize(doc_body(frag))

    corpus_dir = ROOT / "corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    for old in corpus_dir.glob("*.xml"):
        old.unlink()
    for chapter, frags in sorted(files.items()):
        (corpus_dir / f"ata{chapter}.xml").write_text(
            f'<?xml version="1.0" encoding="UTF-8"?>\n<manual chapter="{chapter}">\n' + "".join(frags) + "</manual>\n",
            encoding="utf-8")

    (ROOT / "abbrev.tsv").write_text(
        "# abbreviation<TAB>expansion (whole tokens, case-sensitive)\n" + "".join(f"{k}\t{v}\n" for k, v in ABBREVS),
        encoding="utf-8")
    (ROOT / "units.tsv").write_text(
        "# regex<TAB>replacement, applied in order\n" + "".join(f"{p}\t{r}\n" for p, r in UNITS), encoding="utf-8")

    all_clauses = [(d, c) for d, b in bodies.items() for c in clauses(b)]
    lines = []
    for doc, q, raw in FACTS:
        answer = VFE_ANSWER if raw is None else normalize(raw)
        body = bodies[doc]
        start = body.find(answer)
        assert start >= 0, (doc, answer)
        terms = content_terms(q)
        assert terms <= {t.lower() for t in tokens(answer)}, (q, terms, answer)
        assert len(tokens(answer)) <= 15, answer
        covering = [(d, c) for d, c in all_clauses if terms <= {t.lower() for t in tokens(c)}]
        assert covering == [(doc, answer)], (q, covering)
        lines.append(json.dumps({"question": q, "gold_doc_id": doc, "answers": [{"text": answer, "char_start": start}]},
                                ensure_ascii=False))
    (ROOT / "sanity_questions.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")

    words = {d: len(b.split()) for d, b in bodies.items()}
    print(f"{len(words)} docs, mean {sum(words.values()) / len(words):.0f} words, max {max(words.values())}")


if __name__ == "__main__":
    main()
