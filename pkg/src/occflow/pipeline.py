"""Staged training and evaluation over the three splits.

Each stage writes its artifacts under ``<out>/models/split<k>/`` and records
their sha256 in ``<out>/pipeline_state.json`` together with the hashes of
the upstream artifacts it consumed. A stage whose record matches the
current config and upstream hashes is skipped, so reruns are cheap and
produce the same files.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import baselines
from .config import RunConfig
from .errors import DependencyError
from .evalkit import (
    EvalReport,
    MethodResult,
    auc_bar_figure,
    auc_scores,
    best_threshold_accuracy,
    export_distributions,
    export_flow_gallery,
    ofw_series_figure,
    run_ablation,
    scored_samples,
    window_figure,
    windowed_auc,
    write_ablation,
    write_report,
)
from .flowdata import FlowDataset, SimScenario, flow_weight_series, ingest, simulate
from .flowdata.io import directory_digest
from .ndcompute import ModelBundle
from .occmodels import (
    ClassifierModel,
    DcaeModel,
    GeneratorModel,
    HypersphereDescription,
    init_center,
    train_classifier,
    train_dcae,
    train_dsvdd,
    train_generator,
)
from .occmodels.common import write_history

log = logging.getLogger(__name__)

N_SPLITS = 3
STATE_FILE = "pipeline_state.json"

# stage -> (upstream stages, config sections that affect it)
STAGES = {
    "dcae": ((), ("dcae",)),
    "dsvdd": (("dcae",), ("dsvdd",)),
    "iogen": (("dcae", "dsvdd"), ("iogen",)),
    "classifier": (("dsvdd", "iogen"), ("classifier",)),
    "gen": (("dcae", "dsvdd"), ("gen", "classifier")),
    "ngen": (("dsvdd",), ("ngen", "classifier")),
    "ocsvm": (("dcae",), ("ocsvm",)),
}
STAGE_ORDER = list(STAGES)
METHODS = ("ofw", "dcae", "ocsvm", "dsvdd", "gen", "ngen", "iogen")


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def stage_rng(cfg: RunConfig, stage: str, split: int) -> np.random.Generator:
    """Independent stream per (stage, split), so stages can run in any order."""
    return np.random.default_rng([cfg.seeds.init, cfg.seeds.noise, split, STAGE_ORDER.index(stage)])


def eval_rng(cfg: RunConfig, split: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seeds.noise, split, len(STAGE_ORDER)])


@dataclass
class Workspace:
    config: RunConfig
    out: Path

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "Workspace":
        return cls(cfg, Path(cfg.out_dir))

    @property
    def dataset_root(self) -> Path:
        return Path(self.config.dataset_root) if self.config.dataset_root else self.out / "dataset"

    def model_dir(self, split: int) -> Path:
        return self.out / "models" / f"split{split}"

    def artifact(self, stage: str, split: int) -> Path:
        return self.model_dir(split) / f"{stage}.occf"

    # -- state file ------------------------------------------------------------

    def read_state(self) -> dict:
        p = self.out / STATE_FILE
        return json.loads(p.read_text()) if p.exists() else {}

    def write_state(self, state: dict) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / STATE_FILE).write_text(json.dumps(state, indent=2, sort_keys=True) + "\n")

    def dataset_digest(self) -> str:
        root = self.dataset_root
        if not (root / "manifest.json").exists():
            hint = "occflow simulate" if self.config.dataset_root is None else f"ingest a dataset into {root}"
            raise DependencyError(f"no dataset at {root}; run `{hint}` first")
        return directory_digest(root)

    def record(self, stage: str, split: int) -> dict | None:
        return self.read_state().get("stages", {}).get(stage, {}).get(str(split))

    def expected_inputs(self, stage: str, split: int, dataset_digest: str) -> dict:
        """What a fresh record of ``stage`` must have consumed; raises when upstream is unusable."""
        ups, sections = STAGES[stage]
        inputs = {"dataset": dataset_digest, "config": self.config.section_digest(*sections)}
        for up in ups:
            rec = self.record(up, split)
            path = self.artifact(up, split)
            if rec is None or not path.exists():
                raise DependencyError(f"stage {stage!r} (split {split}) needs {up!r}: "
                                      f"run `occflow train --stage {up}` first")
            if file_hash(path) != rec["hash"] or not self.is_fresh(up, split, dataset_digest):
                raise DependencyError(f"stage {stage!r} (split {split}): upstream {up!r} is stale; "
                                      f"run `occflow train --stage {up}` again")
            inputs[up] = rec["hash"]
        return inputs

    def is_fresh(self, stage: str, split: int, dataset_digest: str) -> bool:
        rec = self.record(stage, split)
        path = self.artifact(stage, split)
        if rec is None or not path.exists() or file_hash(path) != rec["hash"]:
            return False
        try:
            return rec["inputs"] == self.expected_inputs(stage, split, dataset_digest)
        except DependencyError:
            return False

    def status(self) -> dict:
        """``stage -> split -> fresh | stale | missing`` for --dry-run."""
        try:
            digest = self.dataset_digest()
        except DependencyError:
            digest = None
        out = {}
        for stage in STAGE_ORDER:
            out[stage] = {}
            for k in range(N_SPLITS):
                if self.record(stage, k) is None:
                    out[stage][k] = "missing"
                else:
                    out[stage][k] = "fresh" if digest and self.is_fresh(stage, k, digest) else "stale"
        return out

    def load(self, stage: str, split: int):
        b = ModelBundle.load(self.artifact(stage, split))
        if stage == "dcae":
            return DcaeModel.from_bundle(b)
        if stage == "dsvdd":
            return HypersphereDescription.from_bundle(b)
        if stage == "iogen":
            return GeneratorModel.from_bundle(b)
        if stage == "classifier":
            return ClassifierModel.from_bundle(b)
        if stage == "gen":
            gen = GeneratorModel.from_bundle(_sub_bundle(b, "gen", ("generator", "disc_body", "disc_head")))
            return gen, ClassifierModel(b.networks["classifier"], "gen", b.attrs.get("classifier_history", []))
        if stage == "ngen":
            return baselines.NGenNoise(b.attrs["alpha"]), ClassifierModel.from_bundle(b)
        if stage == "ocsvm":
            return [baselines.OcSvmModel(a["nu"], a["kernel"], a["gamma"], b.arrays[f"support{i}"],
                                         b.arrays[f"coef{i}"], a["rho"]) for i, a in enumerate(b.attrs["models"])]
        raise KeyError(stage)


def _sub_bundle(b: ModelBundle, kind, names):
    return ModelBundle(kind, {n: b.networks[n] for n in names}, attrs=b.attrs)


# -- stage bodies --------------------------------------------------------------


def _history_csv(path, rows):
    if rows:
        write_history(path, rows)


def build_stage(ws: Workspace, stage: str, split: int, view) -> ModelBundle:
    cfg = ws.config
    rng = stage_rng(cfg, stage, split)
    x = view.normalized(view.train)
    if stage == "dcae":
        return train_dcae(x, cfg.dcae, rng, cfg.widths).to_bundle()
    if stage == "dsvdd":
        dcae = ws.load("dcae", split)
        center, enc = init_center(dcae.encoder, x, cfg.dsvdd.center_eps, return_encodings=True)
        return train_dsvdd(dcae.encoder, center, x, cfg.dsvdd, rng, enc).to_bundle()
    if stage == "iogen":
        return train_generator("iogen", ws.load("dcae", split), ws.load("dsvdd", split), x, cfg.iogen, rng,
                               cfg.widths).to_bundle()
    if stage == "classifier":
        return train_classifier(ws.load("dsvdd", split), ws.load("iogen", split), x, cfg.classifier, rng).to_bundle()
    if stage == "gen":
        gen, clf = baselines.train_gen(ws.load("dcae", split), ws.load("dsvdd", split), x, cfg.gen,
                                       cfg.classifier, rng, cfg.widths)
        b = gen.to_bundle()
        b.networks["classifier"] = clf.network
        b.attrs["classifier_history"] = clf.history
        return b
    if stage == "ngen":
        noise, clf = baselines.train_ngen(ws.load("dsvdd", split), x, cfg.ngen, cfg.classifier, rng)
        b = ModelBundle("ngen", {"classifier": clf.network},
                        attrs={"alpha": noise.alpha, "source": "ngen", "history": clf.history})
        return b
    if stage == "ocsvm":
        models = baselines.train_ocsvm(ws.load("dcae", split).encoder, x, cfg.ocsvm)
        arrays = {}
        for i, mdl in enumerate(models):
            arrays[f"support{i}"] = mdl.support
            arrays[f"coef{i}"] = mdl.coef
        attrs = {"models": [{"nu": mdl.nu, "kernel": mdl.kernel, "gamma": mdl.gamma, "rho": mdl.rho}
                            for mdl in models]}
        return ModelBundle("ocsvm", arrays=arrays, attrs=attrs)
    raise KeyError(stage)


def load_dataset(ws: Workspace) -> FlowDataset:
    ws.dataset_digest()
    return ingest(ws.dataset_root, ws.config.m)


def train(ws: Workspace, stages=None, dataset: FlowDataset | None = None) -> dict:
    """Run the requested stages (all, in dependency order, by default) on every split.

    Returns ``stage -> split -> sha256``.
    """
    stages = STAGE_ORDER if not stages else [s for s in STAGE_ORDER if s in stages]
    digest = ws.dataset_digest()
    dataset = dataset or load_dataset(ws)
    hashes = {}
    for stage in stages:
        hashes[stage] = {}
        for k in range(N_SPLITS):
            inputs = ws.expected_inputs(stage, k, digest)
            if ws.is_fresh(stage, k, digest):
                log.info("%s split %d: up to date", stage, k)
                hashes[stage][k] = ws.record(stage, k)["hash"]
                continue
            log.info("%s split %d: training", stage, k)
            t0 = time.perf_counter()
            bundle = build_stage(ws, stage, k, dataset.split(k))
            seconds = time.perf_counter() - t0
            h = bundle.save(ws.artifact(stage, k))
            _history_csv(ws.model_dir(k) / f"{stage}_history.csv", bundle.attrs.get("history"))
            state = ws.read_state()
            state.setdefault("stages", {}).setdefault(stage, {})[str(k)] = {"hash": h, "inputs": inputs,
                                                                        "seconds": round(seconds, 3)}
            ws.write_state(state)
            hashes[stage][k] = h
    return hashes


# -- evaluation ----------------------------------------------------------------


@dataclass
class SplitScores:
    split: int
    scores: dict  # method -> (stable scores, unstable scores)
    notes: dict
    distances: dict  # group -> svdd distances
    likelihoods: dict  # group -> IO-GEN classifier likelihoods


def score_split(ws: Workspace, dataset: FlowDataset, k: int, available: set, n_synth: int = 200) -> SplitScores:
    view = dataset.split(k)
    xs, xu = view.normalized(view.test_stable), view.normalized(view.unstable)
    raw_s = np.stack([s.raw() for s in view.test_stable])
    raw_u = np.stack([s.raw() for s in view.unstable])
    rng = eval_rng(ws.config, k)
    scores, notes, dist, lik = {}, {}, {}, {}
    scores["ofw"] = (baselines.ofw_score(raw_s), baselines.ofw_score(raw_u))
    dcae = ws.load("dcae", k)
    scores["dcae"] = (baselines.dcae_error_score(dcae, xs), baselines.dcae_error_score(dcae, xu))
    if "ocsvm" in available:
        fs, fu = dcae.encoder.predict(xs), dcae.encoder.predict(xu)
        best = None
        for mdl in ws.load("ocsvm", k):
            pair = (mdl.score(fs), mdl.score(fu))
            a = _auc_pair(pair)
            notes.setdefault("ocsvm", {}).setdefault("auc_by_nu", {})[str(mdl.nu)] = a
            if best is None or a > best[0]:
                best = (a, mdl.nu, pair)
        scores["ocsvm"] = best[2]
        notes["ocsvm"]["best_nu"] = best[1]
    if "dsvdd" in available:
        dsvdd = ws.load("dsvdd", k)
        es, eu = dsvdd.encode(xs), dsvdd.encode(xu)
        dist["stable"] = ((es - dsvdd.center) ** 2).sum(axis=1)
        dist["unstable"] = ((eu - dsvdd.center) ** 2).sum(axis=1)
        scores["dsvdd"] = (dist["stable"], dist["unstable"])
        if "iogen" in available:
            eg = dsvdd.encode(ws.load("iogen", k).sample(rng, n_synth))
            dist["iogen"] = ((eg - dsvdd.center) ** 2).sum(axis=1)
            if "classifier" in available:
                clf = ws.load("classifier", k)
                lik = {"iogen": clf.likelihood(eg), "stable": clf.likelihood(es), "unstable": clf.likelihood(eu)}
                scores["iogen"] = (lik["stable"], lik["unstable"])
        if "gen" in available:
            gen, gclf = ws.load("gen", k)
            dist["gen"] = ((dsvdd.encode(gen.sample(rng, n_synth)) - dsvdd.center) ** 2).sum(axis=1)
            scores["gen"] = (gclf.likelihood(es), gclf.likelihood(eu))
        if "ngen" in available:
            _, nclf = ws.load("ngen", k)
            scores["ngen"] = (nclf.likelihood(es), nclf.likelihood(eu))
    return SplitScores(k, scores, notes, dist, lik)


def daily_flow_weight(dataset: FlowDataset) -> dict:
    """Mean and std of the standardized per-frame flow weight for each day."""
    by_day = {}
    for _, day, w in flow_weight_series(dataset):
        by_day.setdefault(day, []).append(w)
    return {d: (float(np.mean(v)), float(np.std(v))) for d, v in sorted(by_day.items())}


def _auc_pair(pair):
    s, u = pair
    return auc_scores(np.concatenate([s, u]), np.r_[np.zeros(len(s)), np.ones(len(u))])


def evaluate(ws: Workspace, jobs: int = 1, timestamp: float | None = None) -> Path:
    """Score every available method on every split and write a report directory."""
    cfg = ws.config
    digest = ws.dataset_digest()
    available = {s for s in STAGE_ORDER if all(ws.is_fresh(s, k, digest) for k in range(N_SPLITS))}
    if "dcae" not in available:
        raise DependencyError("evaluation needs trained DCAEs: run `occflow train --stage dcae` first")
    dataset = load_dataset(ws)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        per_split = list(pool.map(lambda k: score_split(ws, dataset, k, available), range(N_SPLITS)))

    days_u = [s.day_label for s in dataset.split(0).unstable]
    methods = {}
    for name in METHODS:
        if not all(name in ps.scores for ps in per_split):
            continue
        res = MethodResult()
        for ps in per_split:
            s, u = ps.scores[name]
            res.per_split.append(_auc_pair((s, u)))
            res.accuracy.append(best_threshold_accuracy(np.r_[s, u], np.r_[np.zeros(len(s)), np.ones(len(u))])[0])
            samples = (scored_samples(s, np.zeros(len(s), int), np.full(len(s), -1), ps.split)
                       + scored_samples(u, np.ones(len(u), int), days_u, ps.split))
            for w, v in windowed_auc(samples, cfg.eval.windows).items():
                res.windows.setdefault(w, []).append(v)
            if name in ps.notes:
                res.notes[f"split{ps.split}"] = ps.notes[name]
        methods[name] = res

    medians = {f"split{ps.split}": {
        "distance": {g: float(np.median(v)) for g, v in ps.distances.items()},
        "likelihood": {g: float(np.median(v)) for g, v in ps.likelihoods.items()},
    } for ps in per_split}
    seeds = {"split": cfg.seeds.split, "init": cfg.seeds.init, "noise": cfg.seeds.noise}
    report = EvalReport(methods, cfg.to_dict(), cfg.digest(), seeds, medians, cfg.eval.significance)
    run = write_report(report, ws.out / "runs", timestamp)
    auc_bar_figure(report.table(), run / "auc.svg")
    window_figure(report.window_table(), run / "windows.svg", report.significant_improvements())
    ofw_series_figure(daily_flow_weight(dataset), run / "ofw_series.svg")
    for ps in per_split:
        if ps.distances:
            export_distributions(ps.distances, ps.likelihoods, run, cfg.eval.hist_max_bins, f"split{ps.split}")
    log.info("report written to %s", run)
    return run


# -- other commands --------------------------------------------------------------


def simulate_dataset(ws: Workspace) -> Path:
    cfg = ws.config
    scenario = SimScenario.from_dict(cfg.scenario or {})
    root = ws.dataset_root
    if (root / "manifest.json").exists():
        # identical inputs produce identical files; only rewrite when they differ
        existing = json.loads((root / "scenario.json").read_text()) if (root / "scenario.json").exists() else None
        meta = json.loads((root / "manifest.json").read_text())
        if existing == scenario.to_dict() and meta.get("m") == cfg.m and meta.get("split_seed") == cfg.seeds.split \
                and meta.get("split_mode") == cfg.split_mode:
            log.info("dataset at %s is up to date", root)
            return root
    simulate(scenario, root, cfg.m, cfg.seeds.split, cfg.split_mode)
    return root


def gallery(ws: Workspace, n: int = 6, split: int = 0) -> Path:
    digest = ws.dataset_digest()
    if not ws.is_fresh("iogen", split, digest):
        raise DependencyError("the gallery needs a trained IO-GEN: run `occflow train --stage iogen` first")
    dataset = load_dataset(ws)
    view = dataset.split(split)
    path = ws.out / "gallery.png"
    export_flow_gallery(ws.load("iogen", split), view.normalized(view.test_stable[:n]), n, path,
                        eval_rng(ws.config, split))
    return path


def ablate(ws: Workspace) -> Path:
    """IO-GEN AUC per m and split; each m is trained in memory from the same frames."""
    cfg = ws.config
    ws.dataset_digest()
    cache = {}

    def run_split(m, k):
        if m not in cache:
            cache[m] = ingest(ws.dataset_root, m)
        view = cache[m].split(k)
        x = view.normalized(view.train)
        rng = np.random.default_rng([cfg.seeds.init, cfg.seeds.noise, k, m])
        dcae = train_dcae(x, cfg.dcae, rng, cfg.widths)
        center, enc = init_center(dcae.encoder, x, cfg.dsvdd.center_eps, return_encodings=True)
        dsvdd = train_dsvdd(dcae.encoder, center, x, cfg.dsvdd, rng, enc)
        iogen = train_generator("iogen", dcae, dsvdd, x, cfg.iogen, rng, cfg.widths)
        clf = train_classifier(dsvdd, iogen, x, cfg.classifier, rng)
        s = clf.likelihood(dsvdd.encode(view.normalized(view.test_stable)))
        u = clf.likelihood(dsvdd.encode(view.normalized(view.unstable)))
        return _auc_pair((s, u))

    rows = run_ablation(cfg.ablation_m, N_SPLITS, run_split)
    out = ws.out / "ablation"
    out.mkdir(parents=True, exist_ok=True)
    write_ablation(rows, out / "ablation.csv")
    (out / "ablation.json").write_text(json.dumps({"config_hash": cfg.digest(), "rows": rows}, indent=2))
    return out
