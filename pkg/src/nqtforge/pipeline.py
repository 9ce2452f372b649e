"""Pipeline stages behind the command line: ingest, train, translate, correct, evaluate, e2e.

Every stage reads and writes fixed file names inside ``cfg.run_dir`` so
the stages can run one at a time or chained.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from pathlib import Path

from .corrector import correct, reslot
from .datasets import Corpus, gen_synthetic, load_lcquad, load_qald
from .evalkit import evaluate_nqts
from .model import NqtTranslator
from .nqt import NqtParseError, load_catalog, parse_nqt, serialize_nqt
from .preprocessing import MettLexicon, mett_tag
from .sparql import (
    EndpointError, LinkerIndex, SparqlError, TripleStore, classify_question, execute, filter_answers,
    nqt_to_sparql, parse_sparql, select_query_form,
)

log = logging.getLogger(__name__)

FILES = {
    "dataset": "dataset.norm.json",
    "model": "model.ckpt",
    "loss": "loss.csv",
    "raw": "nqt.raw.txt",
    "corrected": "nqt.corrected.txt",
    "eval": "eval.json",
    "audit": "audit.log",
    "store": "store.nt",
    "linker": "linker.json",
    "lexicon": "lexicon.txt",
    "records": "eval.csv",
}


class StageError(RuntimeError):
    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _path(cfg, key):
    return cfg.run_path / FILES[key]


def _require(cfg, key, stage, producer):
    path = _path(cfg, key)
    if not path.exists():
        raise StageError(stage, f"{path} not found; run '{producer}' first")
    return path


# -- ingest ---------------------------------------------------------------------


def ingest(cfg):
    fmt = cfg.dataset_format
    if fmt == "synthetic":
        corpus = gen_synthetic(cfg.synthetic_seed, cfg.synthetic_n, cfg.synthetic_test)
    elif fmt == "norm":
        corpus = Corpus.loads(Path(cfg.dataset).read_text(encoding="utf-8"))
    else:
        loader = load_lcquad if fmt == "lcquad" else load_qald
        corpus = loader(cfg.dataset, "train")
        if cfg.dataset_test:
            test = loader(cfg.dataset_test, "test")
            corpus = Corpus(list(corpus) + list(test), corpus.exclusions + test.exclusions)
    if cfg.endpoint or cfg.store:
        corpus = _drop_unanswerable(corpus, cfg.endpoint or load_store(cfg, "ingest"), cfg.timeout)
    if not corpus:
        raise StageError("ingest", "no usable records after exclusions")
    seen = set()
    for r in corpus:
        if r.id in seen:
            raise StageError("ingest", f"duplicate record id {r.id}")
        seen.add(r.id)
    atomic_write(_path(cfg, "dataset"), corpus.dumps())
    if corpus.store is not None:
        atomic_write(_path(cfg, "store"), corpus.store.dumps())
    linker = LinkerIndex.from_queries(r.gold_sparql for r in corpus)
    atomic_write(_path(cfg, "linker"), json.dumps(linker.to_dict(), indent=1, sort_keys=True) + "\n")
    data = linker.to_dict()
    lexicon = MettLexicon.build(data["predicate"], data["class"])
    tmp = _path(cfg, "lexicon").with_suffix(".tmp")
    lexicon.save(tmp)
    os.replace(tmp, _path(cfg, "lexicon"))
    for rid, reason in corpus.exclusions:
        log.info("excluded %s: %s", rid, reason)
    return {"records": len(corpus), "train": len(corpus.split("train")), "test": len(corpus.split("test")),
            "excluded": len(corpus.exclusions)}


def _drop_unanswerable(corpus, endpoint, timeout):
    """Exclude records whose gold query returns nothing on the configured endpoint."""
    kept, dropped = [], []
    for r in corpus:
        try:
            answers = execute(parse_sparql(r.gold_sparql), endpoint, timeout)
        except EndpointError as exc:
            raise StageError("ingest", f"gold query for {r.id} failed: {exc}") from None
        if answers:
            kept.append(r)
        else:
            dropped.append((r.id, "gold query returns no answers"))
    return Corpus(kept, corpus.exclusions + dropped, corpus.store)


def load_corpus(cfg, stage):
    return Corpus.loads(_require(cfg, "dataset", stage, "ingest").read_text(encoding="utf-8"))


def load_linker(cfg, stage):
    return LinkerIndex.load(_require(cfg, "linker", stage, "ingest"))


def load_lexicon(cfg, stage):
    if cfg.lexicon:
        return MettLexicon.load(cfg.lexicon)
    return MettLexicon.load(_require(cfg, "lexicon", stage, "ingest"))


def load_store(cfg, stage):
    path = Path(cfg.store) if cfg.store else _path(cfg, "store")
    if not path.exists():
        raise StageError(stage, f"no fixture store at {path}; set store=<path> or endpoint=<url>")
    return TripleStore.load(path)


# -- train ----------------------------------------------------------------------


def _source(record):
    return list(record.tokens)


def train(cfg):
    corpus = load_corpus(cfg, "train")
    train_set, test_set = corpus.split("train"), corpus.split("test")
    if not train_set:
        raise StageError("train", "dataset has no train split")
    model = NqtTranslator(**cfg.translator_params())
    rows = []

    def on_epoch(row):
        rows.append(row)
        log.info("epoch %d loss %.4f val_exact_match %.4f", row["epoch"], row["loss"], row["val_exact_match"])

    start = time.perf_counter()
    model.fit([_source(r) for r in train_set], [r.gold_nqt for r in train_set],
              X_val=[_source(r) for r in test_set] or None, y_val=[r.gold_nqt for r in test_set] or None,
              on_epoch=on_epoch)
    tmp = _path(cfg, "model").with_suffix(".tmp")
    model.save(tmp)
    os.replace(tmp, _path(cfg, "model"))
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["epoch", "loss", "val_exact_match"], lineterminator="\n")
    writer.writeheader()
    writer.writerows(model.history_)
    atomic_write(_path(cfg, "loss"), buf.getvalue())
    return {"epochs": len(model.history_), "final_loss": model.history_[-1]["loss"],
            "seconds": round(time.perf_counter() - start, 1)}


# -- translate / correct ----------------------------------------------------------


def _write_nqt_lines(path, items):
    atomic_write(path, "".join(f"{rid}\t{text}\n" for rid, text in items))


def read_nqt_lines(path):
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        rid, _, text = line.partition("\t")
        out[rid] = text
    return out


def _parse(text, separator):
    if not text.strip():
        return None
    try:
        return parse_nqt(text, lenient=True, style=separator)[0]
    except NqtParseError:
        return None


def translate(cfg):
    corpus = load_corpus(cfg, "translate")
    test_set = corpus.split("test")
    if not test_set:
        raise StageError("translate", "dataset has no test split")
    if cfg.inject_gold:
        lines = [(r.id, serialize_nqt(r.gold_nqt, cfg.separator)) for r in test_set]
        truncated = 0
    else:
        model = NqtTranslator.load(_require(cfg, "model", "translate", "train"))
        if model.separator != cfg.separator:
            raise StageError("translate", f"model was trained with separator={model.separator}, "
                                          f"config asks for {cfg.separator}")
        tokens, flags = model.predict_tokens([_source(r) for r in test_set])
        lines = [(r.id, " ".join(t)) for r, t in zip(test_set, tokens)]
        truncated = sum(flags)
    _write_nqt_lines(_path(cfg, "raw"), lines)
    parsed = sum(_parse(text, cfg.separator) is not None for _, text in lines)
    return {"translated": len(lines), "parseable": parsed, "truncated": truncated}


def correct_stage(cfg):
    corpus = load_corpus(cfg, "correct")
    raw = read_nqt_lines(_require(cfg, "raw", "correct", "translate"))
    lexicon = load_lexicon(cfg, "correct")
    catalog = load_catalog(cfg.catalog or None)
    lines, audit, changed = [], [], 0
    for r in corpus.split("test"):
        nqt = _parse(raw.get(r.id, ""), cfg.separator)
        if cfg.correction:
            tagged = mett_tag(r.preprocessed, lexicon)
            fixed, report = correct(nqt, tagged, catalog, seed=cfg.seed)
            changed += bool(report.edits)
            audit.extend(f"{r.id}\t{line}" for line in report.audit_lines())
        else:
            fixed = nqt
        lines.append((r.id, serialize_nqt(fixed, cfg.separator) if fixed is not None and len(fixed) else ""))
    _write_nqt_lines(_path(cfg, "corrected"), lines)
    if cfg.audit:
        atomic_write(_path(cfg, "audit"), "".join(line + "\n" for line in audit))
    return {"corrected": changed, "total": len(lines), "correction": cfg.correction}


# -- evaluate / e2e ----------------------------------------------------------------


def _scored(records, texts, separator, label, answers=None):
    preds = [reslot(_parse(texts.get(r.id, ""), separator), r.preprocessed) for r in records]
    return evaluate_nqts(preds, [r.gold_nqt for r in records], ids=[r.id for r in records],
                         questions=[r.question for r in records], answers=answers, label=label)


def _delta(a, b):
    return {"bleu1": b.bleu1 - a.bleu1, "exact_match": b.exact_match - a.exact_match}


def evaluate(cfg):
    corpus = load_corpus(cfg, "evaluate")
    test_set = corpus.split("test")
    raw = _scored(test_set, read_nqt_lines(_require(cfg, "raw", "evaluate", "translate")), cfg.separator, "raw")
    out = {"raw": raw.summary()}
    final = raw
    if _path(cfg, "corrected").exists():
        final = _scored(test_set, read_nqt_lines(_path(cfg, "corrected")), cfg.separator, "corrected")
        out["corrected"] = final.summary()
        out["delta"] = _delta(raw, final)
    atomic_write(_path(cfg, "eval"), json.dumps(out, indent=2, sort_keys=True) + "\n")
    atomic_write(_path(cfg, "records"), final.to_csv())
    return out


def answer_questions(records, texts, separator, linker, endpoint, timeout):
    """System and gold answers per record; failures leave the system side empty."""
    pairs, failures = [], {}
    for r in records:
        gold = execute(parse_sparql(r.gold_sparql), endpoint, timeout)
        nqt = _parse(texts.get(r.id, ""), separator)
        atype = classify_question(r.question)
        system = []
        if nqt is None:
            failures[r.id] = "unparseable NQT"
        else:
            try:
                query = nqt_to_sparql(nqt, select_query_form(atype), linker, r.ner_surface)
                system = filter_answers(execute(query, endpoint, timeout), atype)
            except (SparqlError, EndpointError) as exc:
                failures[r.id] = str(exc)
        pairs.append((system, gold))
    return pairs, failures


def e2e(cfg):
    stats = {"translate": translate(cfg), "correct": correct_stage(cfg)}
    corpus = load_corpus(cfg, "e2e")
    test_set = corpus.split("test")
    linker = load_linker(cfg, "e2e")
    endpoint = cfg.endpoint or load_store(cfg, "e2e")
    raw_texts = read_nqt_lines(_path(cfg, "raw"))
    texts = read_nqt_lines(_path(cfg, "corrected"))
    try:
        answers, failures = answer_questions(test_set, texts, cfg.separator, linker, endpoint, cfg.timeout)
    except EndpointError as exc:
        raise StageError("e2e", f"gold query execution failed: {exc}") from None
    raw = _scored(test_set, raw_texts, cfg.separator, "raw")
    final = _scored(test_set, texts, cfg.separator, "corrected" if cfg.correction else "raw", answers)
    out = {"raw": raw.summary(), "final": final.summary(), "delta": _delta(raw, final),
           "answer_failures": failures, "stages": stats, "inject_gold": cfg.inject_gold}
    atomic_write(_path(cfg, "eval"), json.dumps(out, indent=2, sort_keys=True) + "\n")
    atomic_write(_path(cfg, "records"), final.to_csv())
    return out


# -- separator ablation --------------------------------------------------------------


def ablate(cfg, styles=("sep", "comma")):
    """Train and evaluate once per separator style and write a comparison report."""
    results = {}
    for style in styles:
        sub = cfg.replace(run_dir=str(cfg.run_path / f"ablation-{style}"), separator=style)
        ingest(sub)
        train(sub)
        translate(sub)
        correct_stage(sub)
        results[style] = evaluate(sub)
    lines = ["separator ablation", "", f"{'style':<8} {'stage':<10} {'BLEU-1':>8} {'EM':>8}"]
    for style, res in results.items():
        for stage in ("raw", "corrected"):
            if stage in res:
                lines.append(f"{style:<8} {stage:<10} {res[stage]['bleu1']:>8.4f} {res[stage]['exact_match']:>8.4f}")
    report = "\n".join(lines) + "\n"
    atomic_write(cfg.run_path / "ablation.json", json.dumps(results, indent=2, sort_keys=True) + "\n")
    atomic_write(cfg.run_path / "ablation.txt", report)
    return {"styles": list(results), "report": report}


STAGES = {
    "ingest": ingest,
    "train": train,
    "translate": translate,
    "correct": correct_stage,
    "evaluate": evaluate,
    "e2e": e2e,
    "ablate": ablate,
}
