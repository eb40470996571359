#!/usr/bin/env python3
"""Regenerates the scripted fixtures under tests/fixtures.

Outputs are committed; rerunning must reproduce them byte for byte.

Embeddings are engineered in a 384-dimensional space: every generated topic
text gets its own basis direction, so sibling topics are orthogonal, except
the first candidate of turn 10, which sits at cosine 0.60 to "Engine Power"
and must be rejected. Insight summaries mix their topic directions with a
private direction.
"""

import csv
import io
import json
import math
import os
import random
import statistics

HERE = os.path.dirname(os.path.abspath(__file__))
DIM = 384


def dump(path, obj):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")


def unit(weights):
    v = [0.0] * DIM
    for axis, w in weights.items():
        v[axis] += w
    n = math.sqrt(sum(x * x for x in v))
    return [round(x / n, 6) for x in v]


# ---------------------------------------------------------------------------
# Dataset

def make_cars():
    rng = random.Random(20240315)
    makers = {
        "USA": ["chevrolet", "ford", "plymouth", "dodge", "amc", "buick"],
        "Europe": ["volkswagen", "peugeot", "audi", "volvo", "fiat"],
        "Japan": ["toyota", "datsun", "honda", "mazda", "subaru"],
    }
    rows = []
    for i in range(120):
        origin = rng.choices(["USA", "Europe", "Japan"], weights=[62, 18, 20])[0]
        year = 1970 + rng.randrange(13)
        if origin == "USA":
            cylinders = rng.choices([4, 6, 8], weights=[30, 30, 40])[0]
        else:
            cylinders = rng.choices([4, 6], weights=[85, 15])[0]
        displacement = round(cylinders * rng.uniform(22.0, 46.0))
        horsepower = round(0.42 * displacement + rng.uniform(25, 55))
        if i == 17:
            horsepower = 230  # engineered outlier
        weight = round(1300 + 7.5 * displacement + rng.uniform(-250, 250))
        acceleration = round(24.5 - 0.055 * horsepower + rng.uniform(-1.2, 1.2), 1)
        mpg = round(47.0 - 0.0068 * weight + 0.45 * (year - 1970) + rng.uniform(-2.5, 2.5), 1)
        name = "%s model %d" % (rng.choice(makers[origin]), i + 1)
        rows.append({
            "Name": name, "MPG": mpg, "Cylinders": cylinders, "Displacement": displacement,
            "Horsepower": horsepower, "Weight": weight, "Acceleration": acceleration,
            "Year": "%d-01-01" % year, "Origin": origin,
        })
    return rows


def write_csv(path, rows):
    out = io.StringIO()
    w = csv.DictWriter(out, fieldnames=list(rows[0].keys()), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(out.getvalue())


def col(rows, key):
    return [r[key] for r in rows]


def corr(x, y):
    return statistics.correlation(x, y)


def group_mean(rows, key, measure):
    groups = {}
    for r in rows:
        groups.setdefault(r[key], []).append(r[measure])
    return {k: statistics.fmean(v) for k, v in groups.items()}


# ---------------------------------------------------------------------------
# Replay bundle

class Bundle:
    def __init__(self):
        self.queries = []
        self.chat = {"analysis": [], "ie_agent": [], "io_agent": [], "semantic_score": []}
        self.embeddings = {}
        self.executions = []
        self.axis = 0
        self.topic_axes = {}

    def new_axis(self):
        self.axis += 1
        return self.axis

    def topic(self, title, description, weights=None):
        text = "%s: %s" % (title, description)
        if weights is None:
            a = self.new_axis()
            self.topic_axes[title] = a
            weights = {a: 1.0}
        self.embeddings[text] = unit(weights)
        return text

    def summary_vector(self, summary, main, sub):
        own = self.new_axis() + 200
        self.embeddings[summary] = unit({self.topic_axes[main]: 0.8, self.topic_axes[sub]: 0.5, own: 0.33})


def fence(code):
    return "```python\n%s\n```" % code


def build_replay(rows):
    b = Bundle()
    insights = []  # summaries in creation order

    def turn(query, intro, code, stdout, explanation, artifacts=None, chunks=None):
        b.queries.append(query)
        first = "%s\n\n%s\n" % (intro, fence(code))
        if chunks:
            size = max(1, len(first) // chunks)
            pieces = [first[i:i + size] for i in range(0, len(first), size)]
            b.chat["analysis"].append({"chunks": pieces})
        else:
            b.chat["analysis"].append(first)
        b.chat["analysis"].append(explanation)
        b.executions.append({
            "stdout": stdout, "artifacts": artifacts or [], "exit_status": 0,
            "duration_ms": 40, "timed_out": False,
        })
        # Block layout: 0 intro, 1 code, 2 code_output, then one block per
        # artifact, then the explanation.

    def new(summary, evidence, categories, attributes, actions, score, rationale, main, sub):
        insights.append(summary)
        b.chat["io_agent"].append(json.dumps({"attributes": attributes, "actions": actions}))
        b.chat["semantic_score"].append("%d - %s" % (score, rationale))
        b.summary_vector(summary, main[0], sub[0])
        for decision in (main, sub):
            title, reply = decision[0], decision[1]
            b.chat["io_agent"].append(json.dumps(reply))
        return {"action": "identify_new", "summary": summary, "evidence": evidence, "categories": categories}

    def select(topic_id):
        return {"decision": "select", "topic_id": topic_id}

    def generate(title, description):
        b.topic(title, description)
        return {"decision": "generate", "title": title, "description": description}

    def ev(block, kind, quote):
        return {"block_index": block, "kind": kind, "quote": quote}

    mpg, weight = col(rows, "MPG"), col(rows, "Weight")
    hp, disp = col(rows, "Horsepower"), col(rows, "Displacement")
    acc = col(rows, "Acceleration")

    # T1: weight vs MPG
    r1 = corr(weight, mpg)
    out1 = "Pearson r (Weight, MPG): %.2f\n" % r1
    explain1 = ("Weight and MPG are strongly negatively correlated (r = %.2f): heavier cars travel "
                "fewer miles per gallon." % r1)
    turn("What is the relationship between weight and fuel efficiency?",
         "I'll compute the correlation between Weight and MPG.",
         "import pandas as pd\ndf = pd.read_csv('cars.csv')\nprint('Pearson r (Weight, MPG): %.2f' % df['Weight'].corr(df['MPG']))",
         out1, explain1, chunks=5)
    d = [new("Heavier cars are markedly less fuel efficient: Weight and MPG correlate at r = %.2f." % r1,
             [ev(2, "code_output", "Pearson r (Weight, MPG): %.2f" % r1),
              ev(3, "nl_explanation", "heavier cars travel fewer miles per gallon")],
             ["correlation"], ["Weight", "MPG"], [],
             5, "central driver of fuel efficiency",
             ("Fuel Efficiency", generate("Fuel Efficiency", "How mileage varies across vehicle characteristics and time.")),
             ("Weight and Efficiency", generate("Weight and Efficiency", "The link between vehicle mass and mileage.")))]
    b.chat["ie_agent"].append(json.dumps(d))

    # T2: MPG trend over years, with a chart
    by_year = group_mean(rows, "Year", "MPG")
    years = sorted(by_year)
    first_y, last_y = years[0], years[-1]
    out2 = "".join("%s  %.1f\n" % (y[:4], by_year[y]) for y in years)
    chart = {"mark": "line", "encoding": {"x": {"field": "Year", "type": "temporal"},
                                          "y": {"field": "MPG", "aggregate": "mean"}}}
    explain2 = ("Average MPG rose from %.1f in %s to %.1f in %s, a steady improvement across model years."
                % (by_year[first_y], first_y[:4], by_year[last_y], last_y[:4]))
    turn("How has average MPG changed over the model years?",
         "Let me aggregate MPG by model year and plot it.",
         "m = df.groupby('Year')['MPG'].mean()\nfor y, v in m.items(): print(y[:4], round(v, 1))\nm.plot()",
         out2, explain2,
         artifacts=[{"artifact_id": "a1-chart.json", "kind": "visualization",
                     "content": json.dumps(chart, sort_keys=True, separators=(",", ":"))}])
    d = [new("Fuel efficiency improved steadily: average MPG rose from %.1f in %s to %.1f in %s."
             % (by_year[first_y], first_y[:4], by_year[last_y], last_y[:4]),
             [ev(2, "code_output", "%s  %.1f" % (first_y[:4], by_year[first_y])),
              {"block_index": 3, "kind": "visualization"},
              ev(4, "nl_explanation", "a steady improvement across model years")],
             ["trend"], ["Year", "MPG"], [{"kind": "aggregation", "detail": "mean MPG per Year"}],
             4, "clear long term improvement",
             ("Fuel Efficiency", select("t1")),
             ("Efficiency Over Time", generate("Efficiency Over Time", "How mileage changed across model years.")))]
    b.chat["ie_agent"].append(json.dumps(d))

    # T3: MPG by origin, origin share
    by_origin = group_mean(rows, "Origin", "MPG")
    counts = {o: sum(1 for r in rows if r["Origin"] == o) for o in ("USA", "Europe", "Japan")}
    share_usa = 100.0 * counts["USA"] / len(rows)
    best = max(by_origin, key=by_origin.get)
    out3 = "".join("%-7s mean MPG %.1f  cars %d\n" % (o, by_origin[o], counts[o]) for o in ("USA", "Europe", "Japan"))
    explain3 = ("%s cars have the highest average MPG (%.1f). US cars make up %.0f%% of the dataset."
                % (best, by_origin[best], share_usa))
    turn("Which origin has the most fuel-efficient cars?",
         "I'll compare mean MPG and car counts by Origin.",
         "g = df.groupby('Origin')\nprint(g['MPG'].mean().round(1), g.size())",
         out3, explain3)
    d = [new("%s cars are the most fuel efficient, averaging %.1f MPG." % (best, by_origin[best]),
             [ev(2, "code_output", "%-7s mean MPG %.1f" % (best, by_origin[best])),
              ev(3, "nl_explanation", "%s cars have the highest average MPG (%.1f)." % (best, by_origin[best]))],
             ["extremum", "difference"], ["Origin", "MPG"], [{"kind": "aggregation", "detail": "mean MPG per Origin"}],
             4, "actionable regional contrast",
             ("Fuel Efficiency", select("t1")),
             ("Regional Efficiency", generate("Regional Efficiency", "Mileage differences between manufacturing regions."))),
         new("US-built cars dominate the dataset at %.0f%% of all models." % share_usa,
             [ev(2, "code_output", "USA     mean MPG %.1f  cars %d" % (by_origin["USA"], counts["USA"])),
              ev(3, "nl_explanation", "US cars make up %.0f%% of the dataset." % share_usa)],
             ["proportion"], ["Origin"], [{"kind": "aggregation", "detail": "count of cars per Origin"}],
             3, "useful context on sample composition",
             ("Fleet Composition", generate("Fleet Composition", "What kinds of vehicles make up the dataset.")),
             ("Origin Mix", generate("Origin Mix", "Share of vehicles by manufacturing region.")))]
    b.chat["ie_agent"].append(json.dumps(d))

    # T4: horsepower vs displacement
    r4 = corr(disp, hp)
    out4 = "Pearson r (Displacement, Horsepower): %.2f\n" % r4
    explain4 = "Larger engines produce more power: displacement and horsepower correlate at r = %.2f." % r4
    turn("How does horsepower relate to engine displacement?",
         "Computing the correlation between Displacement and Horsepower.",
         "print('Pearson r (Displacement, Horsepower): %.2f' % df['Displacement'].corr(df['Horsepower']))",
         out4, explain4)
    d = [new("Engine displacement strongly predicts horsepower (r = %.2f)." % r4,
             [ev(2, "code_output", "Pearson r (Displacement, Horsepower): %.2f" % r4),
              ev(3, "nl_explanation", "Larger engines produce more power")],
             ["correlation"], ["Displacement", "Horsepower"], [],
             4, "expected but strong mechanical link",
             ("Engine Power", generate("Engine Power", "How engine design shapes power output.")),
             ("Engine Size and Output", generate("Engine Size and Output", "Relationship between displacement and horsepower.")))]
    b.chat["ie_agent"].append(json.dumps(d))

    # T5: horsepower outliers
    mean_hp, sd_hp = statistics.fmean(hp), statistics.pstdev(hp)
    top = max(rows, key=lambda r: r["Horsepower"])
    z = (top["Horsepower"] - mean_hp) / sd_hp
    out5 = "max horsepower %d (%s), z = %.2f\n" % (top["Horsepower"], top["Name"], z)
    explain5 = "%s is an outlier with %d horsepower, %.1f standard deviations above the mean." % (
        top["Name"], top["Horsepower"], z)
    turn("Are there outliers in horsepower?",
         "I'll look for horsepower values far from the mean using z-scores.",
         "z = (df['Horsepower'] - df['Horsepower'].mean()) / df['Horsepower'].std(ddof=0)\ni = z.idxmax()\nprint('max horsepower %d (%s), z = %.2f' % (df.Horsepower[i], df.Name[i], z[i]))",
         out5, explain5)
    d = [new("%s is a horsepower outlier at %d hp, %.1f standard deviations above the mean." % (
                 top["Name"], top["Horsepower"], z),
             [ev(2, "code_output", "max horsepower %d (%s), z = %.2f" % (top["Horsepower"], top["Name"], z))],
             ["outlier"], ["Horsepower"], [],
             3, "single unusual vehicle",
             ("Engine Power", select("t7")),
             ("Horsepower Outliers", generate("Horsepower Outliers", "Vehicles with unusually high or low power.")))]
    b.chat["ie_agent"].append(json.dumps(d))

    # T6: 4 vs 8 cylinders, and a refinement of i1
    by_cyl = group_mean(rows, "Cylinders", "MPG")
    rel = abs(by_cyl[4] - by_cyl[8]) / max(abs(by_cyl[4]), abs(by_cyl[8]))
    out6 = "4 cylinders: %.1f MPG\n8 cylinders: %.1f MPG\n" % (by_cyl[4], by_cyl[8])
    explain6 = ("Four-cylinder cars average %.1f MPG versus %.1f for eight-cylinder cars. Part of the gap "
                "reflects weight, since eight-cylinder cars are the heaviest." % (by_cyl[4], by_cyl[8]))
    turn("Compare MPG between 4 and 8 cylinder cars.",
         "Comparing mean MPG for four- and eight-cylinder cars.",
         "m = df.groupby('Cylinders')['MPG'].mean()\nprint('4 cylinders: %.1f MPG' % m[4])\nprint('8 cylinders: %.1f MPG' % m[8])",
         out6, explain6)
    d = [new("Four-cylinder cars average %.1f MPG, %.0f%% more than eight-cylinder cars at %.1f MPG." % (
                 by_cyl[4], 100 * (by_cyl[4] - by_cyl[8]) / by_cyl[8], by_cyl[8]),
             [ev(2, "code_output", "4 cylinders: %.1f MPG" % by_cyl[4]),
              ev(2, "code_output", "8 cylinders: %.1f MPG" % by_cyl[8])],
             ["difference"], ["Cylinders", "MPG"], [{"kind": "aggregation", "detail": "mean MPG per Cylinders"}],
             4, "large practical difference",
             ("Fuel Efficiency", select("t1")),
             ("Cylinder Count Effects", generate("Cylinder Count Effects", "How the number of cylinders affects mileage."))),
         {"action": "refine_existing", "target": "i1",
          "summary": insights[0],
          "evidence": [ev(3, "nl_explanation", "eight-cylinder cars are the heaviest")],
          "categories": ["correlation"]}]
    b.chat["ie_agent"].append(json.dumps(d))

    # T7: weight distribution
    mean_w, sd_w = statistics.fmean(weight), statistics.pstdev(weight)
    cv = sd_w / mean_w
    out7 = "mean %.0f lbs, std %.0f lbs, cv %.2f\n" % (mean_w, sd_w, cv)
    explain7 = "Vehicle weight averages %.0f lbs with a coefficient of variation of %.2f, a moderately wide spread." % (mean_w, cv)
    turn("What is the distribution of vehicle weight?",
         "Summarizing the Weight column.",
         "w = df['Weight']\nprint('mean %.0f lbs, std %.0f lbs, cv %.2f' % (w.mean(), w.std(ddof=0), w.std(ddof=0) / w.mean()))",
         out7, explain7)
    d = [new("Vehicle weight is moderately dispersed: mean %.0f lbs with a coefficient of variation of %.2f." % (mean_w, cv),
             [ev(2, "code_output", "mean %.0f lbs, std %.0f lbs, cv %.2f" % (mean_w, sd_w, cv))],
             ["distribution"], ["Weight"], [],
             2, "descriptive rather than surprising",
             ("Fleet Composition", select("t5")),
             ("Weight Profile", generate("Weight Profile", "Spread and typical values of vehicle weight.")))]
    b.chat["ie_agent"].append(json.dumps(d))

    # T8: cylinder mix and horsepower by cylinders
    cyl_counts = {c: sum(1 for r in rows if r["Cylinders"] == c) for c in (4, 6, 8)}
    share4 = 100.0 * cyl_counts[4] / len(rows)
    hp_by_cyl = group_mean(rows, "Cylinders", "Horsepower")
    out8 = "".join("%d cylinders: %d cars, mean hp %.0f\n" % (c, cyl_counts[c], hp_by_cyl[c]) for c in (4, 6, 8))
    explain8 = ("Four-cylinder engines are the most common (%.0f%% of cars), while eight-cylinder cars "
                "have the highest mean horsepower (%.0f)." % (share4, hp_by_cyl[8]))
    turn("Which cylinder count is most common, and how does power differ?",
         "Counting cars and averaging horsepower per cylinder count.",
         "g = df.groupby('Cylinders')\nfor c, part in g: print('%d cylinders: %d cars, mean hp %.0f' % (c, len(part), part.Horsepower.mean()))",
         out8, explain8)
    d = [new("Four-cylinder engines are the most common configuration, covering %.0f%% of cars." % share4,
             [ev(2, "code_output", "4 cylinders: %d cars" % cyl_counts[4]),
              ev(3, "nl_explanation", "Four-cylinder engines are the most common (%.0f%% of cars)" % share4)],
             ["proportion"], ["Cylinders"], [{"kind": "aggregation", "detail": "count of cars per Cylinders"}],
             3, "useful composition fact",
             ("Fleet Composition", select("t5")),
             ("Cylinder Mix", generate("Cylinder Mix", "Share of vehicles by cylinder count."))),
         new("Eight-cylinder cars have the highest mean horsepower at %.0f hp." % hp_by_cyl[8],
             [ev(2, "code_output", "8 cylinders: %d cars, mean hp %.0f" % (cyl_counts[8], hp_by_cyl[8]))],
             ["extremum"], ["Cylinders", "Horsepower"], [{"kind": "aggregation", "detail": "mean Horsepower per Cylinders"}],
             3, "expected ordering",
             ("Engine Power", select("t7")),
             ("Engine Size and Output", select("t8")))]
    b.chat["ie_agent"].append(json.dumps(d))

    # T9: horsepower trend; the first extraction reply is malformed and repaired
    hp_year = group_mean(rows, "Year", "Horsepower")
    out9 = "".join("%s  %.0f\n" % (y[:4], hp_year[y]) for y in years)
    explain9 = "Average horsepower drifted from %.0f in %s to %.0f in %s." % (
        hp_year[first_y], first_y[:4], hp_year[last_y], last_y[:4])
    turn("How has horsepower changed over the years?",
         "Aggregating horsepower by model year.",
         "m = df.groupby('Year')['Horsepower'].mean()\nfor y, v in m.items(): print(y[:4], round(v))",
         out9, explain9)
    d = [new("Average horsepower moved from %.0f in %s to %.0f in %s." % (
                 hp_year[first_y], first_y[:4], hp_year[last_y], last_y[:4]),
             [ev(2, "code_output", "%s  %.0f" % (last_y[:4], hp_year[last_y])),
              ev(3, "nl_explanation", "Average horsepower drifted")],
             ["trend"], ["Year", "Horsepower"], [{"kind": "aggregation", "detail": "mean Horsepower per Year"}],
             3, "modest change over time",
             ("Engine Power", select("t7")),
             ("Power Over Time", generate("Power Over Time", "How horsepower changed across model years.")))]
    b.chat["ie_agent"].append("Here are the insights I found: the trend in horsepower.")
    b.chat["ie_agent"].append(json.dumps(d))

    # T10: acceleration; the first generated main topic clashes with Engine Power at 0.60
    r10 = corr(hp, acc)
    out10 = "Pearson r (Horsepower, Acceleration): %.2f\n" % r10
    explain10 = "More powerful cars accelerate faster: horsepower and 0-60 time correlate at r = %.2f." % r10
    turn("Which cars accelerate fastest, and why?",
         "Relating Horsepower to Acceleration time.",
         "print('Pearson r (Horsepower, Acceleration): %.2f' % df['Horsepower'].corr(df['Acceleration']))",
         out10, explain10)
    clash_title, clash_desc = "Engine Performance", "How engine output translates into driving performance."
    b.embeddings["%s: %s" % (clash_title, clash_desc)] = unit({b.topic_axes["Engine Power"]: 0.6, b.new_axis(): 0.8})
    b.topic("Acceleration Behavior", "How quickly vehicles reach speed and what drives it.")
    b.topic("Power and Quickness", "Link between horsepower and acceleration time.")
    summary10 = "More powerful cars accelerate faster: Horsepower and Acceleration correlate at r = %.2f." % r10
    insights.append(summary10)
    b.chat["io_agent"].append(json.dumps({"attributes": ["Horsepower", "Acceleration"], "actions": []}))
    b.chat["semantic_score"].append("4 - explains performance differences")
    b.summary_vector(summary10, "Acceleration Behavior", "Power and Quickness")
    b.chat["io_agent"].append(json.dumps({"decision": "generate", "title": clash_title, "description": clash_desc}))
    b.chat["io_agent"].append(json.dumps({"decision": "generate", "title": "Acceleration Behavior",
                                          "description": "How quickly vehicles reach speed and what drives it."}))
    b.chat["io_agent"].append(json.dumps({"decision": "generate", "title": "Power and Quickness",
                                          "description": "Link between horsepower and acceleration time."}))
    d = [{"action": "identify_new", "summary": summary10,
          "evidence": [ev(2, "code_output", "Pearson r (Horsepower, Acceleration): %.2f" % r10),
                       ev(3, "nl_explanation", "More powerful cars accelerate faster")],
          "categories": ["correlation"]}]
    b.chat["ie_agent"].append(json.dumps(d))

    return {"queries": b.queries, "chat": b.chat, "embeddings": b.embeddings, "executions": b.executions}


# ---------------------------------------------------------------------------
# Extract fixtures (recorded turns, no analysis channel)

def one_turn(query, text, code, output):
    return [{"turn_id": 1, "user_query": query, "created_at": 0, "blocks": [
        {"block_index": 0, "kind": "text", "content": text, "language": "", "unterminated": False},
        {"block_index": 1, "kind": "code", "content": code, "language": "python", "unterminated": False},
        {"block_index": 2, "kind": "code_output", "content": output, "language": "", "unterminated": False},
    ]}]


def organization_replies(summary, attributes, embeddings, axis):
    embeddings[summary] = unit({axis: 1.0, axis + 1: 0.5})
    main = ("Mileage", "Fuel efficiency findings.")
    sub = ("Mileage Basics", "Basic mileage facts.")
    embeddings["%s: %s" % main] = unit({axis: 1.0})
    embeddings["%s: %s" % sub] = unit({axis + 1: 1.0})
    return [json.dumps({"attributes": attributes, "actions": []}),
            json.dumps({"decision": "generate", "title": main[0], "description": main[1]}),
            json.dumps({"decision": "generate", "title": sub[0], "description": sub[1]})]


def build_evidence_fixture():
    text = "Japanese cars lead on mileage."
    output = "Japan   mean MPG 30.1\nUSA     mean MPG 21.4\n"
    turns = one_turn("Which origin is most efficient?", text, "print(df.groupby('Origin').MPG.mean())", output)
    # Insight A: all three refs are invalid (missing block, kind mismatch,
    # quote absent), so it is kept as evidence-degraded. Insight B: one
    # valid quote, one ref pointing at another turn. Four refs dropped.
    deltas = [
        {"action": "identify_new", "summary": "Japanese cars average 30.1 MPG.",
         "evidence": [{"block_index": 7, "kind": "code_output", "quote": "30.1"},
                      {"block_index": 2, "kind": "visualization"},
                      {"block_index": 0, "kind": "nl_explanation", "quote": "European cars lead"}],
         "categories": ["extremum"]},
        {"action": "identify_new", "summary": "US cars average 21.4 MPG, the lowest of the origins.",
         "evidence": [{"block_index": 2, "kind": "code_output", "quote": "USA     mean MPG 21.4"},
                      {"block_index": 0, "kind": "nl_explanation", "quote": "lead", "turn_id": 99}],
         "categories": ["extremum"]},
    ]
    embeddings = {}
    io = []
    a = organization_replies(deltas[0]["summary"], ["Origin", "MPG"], embeddings, 1)
    io += a
    embeddings[deltas[1]["summary"]] = unit({1: 1.0, 2: 0.4, 3: 0.2})
    io += [json.dumps({"attributes": ["Origin", "MPG"], "actions": []}),
           json.dumps({"decision": "select", "topic_id": "t1"}),
           json.dumps({"decision": "select", "topic_id": "t2"})]
    agents = {"chat": {"ie_agent": [json.dumps(deltas)], "io_agent": io,
                       "semantic_score": ["4 - notable", "3 - context"]},
              "embeddings": embeddings}
    return turns, agents


def build_fabrication_fixture():
    text = "Mileage improved each decade."
    output = "1970s 24.1\n1980s 31.0\n"
    turns = one_turn("Did mileage improve by decade?", text, "print(df.groupby(df.Year.str[:3]).MPG.mean())", output)
    summary = "Mileage improved from 24.1 MPG in the 1970s to 31.0 MPG in the 1980s."
    deltas = [{"action": "identify_new", "summary": summary,
               "evidence": [{"block_index": 2, "kind": "code_output", "quote": "1980s 31.0"}],
               "categories": ["trend"]}]
    embeddings = {}
    io = organization_replies(summary, ["Decade", "MPG"], embeddings, 1)
    agents = {"chat": {"ie_agent": [json.dumps(deltas)], "io_agent": io, "semantic_score": ["3 - moderate"]},
              "embeddings": embeddings}
    return turns, agents


# ---------------------------------------------------------------------------
# Evaluation fixtures: 104 extracted insights with human labels

def build_eval():
    topics = [{"topic_id": "t%d" % k, "title": title, "description": "", "parent": None,
               "embedding": [], "insight_count": 26, "color_index": k - 1, "provenance": "generated"}
              for k, title in enumerate(["Fuel Efficiency", "Fleet Composition", "Engine Power", "Acceleration"], 1)]
    insights = []
    marks = {}
    for n in range(1, 105):
        topic = topics[(n - 1) % 4]
        iid = "i%d" % n
        insights.append({"insight_id": iid, "topic_id": topic["topic_id"], "subtopic_id": ""})
        # 92 evidence-correct, 92 context-correct, 95 topic-correct.
        gold = topic["title"] if n <= 95 else "Safety"
        marks[iid] = {"evidence_correct": n <= 92, "context_correct": n > 12, "gold_topic": gold}
    snapshot = {"insights": insights, "topics": topics}
    labels = {"labeled_insights": [{"label_id": "L%d" % k, "matched": ["i%d" % k] if k <= 95 else []}
                                   for k in range(1, 105)],
              "insights": marks}
    coverage = {"labeled_insights": [{"label_id": "L%d" % k, "matched": ["i%d" % (2 * k), "i%d" % (2 * k + 1)] if k <= 9 else []}
                                     for k in range(1, 11)]}
    unknown = {"labeled_insights": [{"label_id": "L1", "matched": ["i999"]}]}
    return snapshot, labels, coverage, unknown


def main():
    rows = make_cars()
    write_csv(os.path.join(HERE, "cars", "cars.csv"), rows)
    dump(os.path.join(HERE, "cars", "replay.json"), build_replay(rows))

    turns, agents = build_evidence_fixture()
    dump(os.path.join(HERE, "evidence", "turns.json"), turns)
    dump(os.path.join(HERE, "evidence", "agents.json"), agents)

    turns, agents = build_fabrication_fixture()
    dump(os.path.join(HERE, "fabrication", "turns.json"), turns)
    dump(os.path.join(HERE, "fabrication", "agents.json"), agents)

    snapshot, labels, coverage, unknown = build_eval()
    dump(os.path.join(HERE, "eval", "snapshot.json"), snapshot)
    dump(os.path.join(HERE, "eval", "labels.json"), labels)
    dump(os.path.join(HERE, "eval", "labels_coverage.json"), coverage)
    dump(os.path.join(HERE, "eval", "labels_unknown.json"), unknown)


if __name__ == "__main__":
    main()
