"""
Evaluation — per-query precision / recall / F-beta and QA answer F1
====================================================================

    Precision_i = |pred ∩ gold| / |pred|
    Recall_i    = |pred ∩ gold| / |gold|
    F2_i        = 5 · P · R / (4 · P + R)
    F2          = mean over all gold questions of F2_i

Empty-set conventions (fixed so reports are comparable across runs):
    pred empty, gold nonempty  → P = R = 0
    gold empty, pred nonempty  → P = R = 0
    both empty                 → P = R = 1
"""

import logging
from collections import Counter
from dataclasses import asdict, dataclass
from typing import AbstractSet, Any, Dict, Hashable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from core.exceptions import EvaluationError
from core.text_normalizer import NormalizationConfig, normalize
from data.corpus_loader import ArticleKey, Question

logger = logging.getLogger(__name__)

_ANSWER_NORMALIZATION = NormalizationConfig(lowercase=True, strip_punctuation=True, remove_stopwords=False)

METRICS = ("precision", "recall", "f1", "f2")


def prf(predicted: AbstractSet[Hashable], gold: AbstractSet[Hashable]) -> Tuple[float, float]:
    if not predicted and not gold:
        return 1.0, 1.0
    hits = len(predicted & gold)
    precision = hits / len(predicted) if predicted else 0.0
    recall = hits / len(gold) if gold else 0.0
    return precision, recall


def f_beta(p: float, r: float, beta: float = 2.0) -> float:
    """(1+β²)·p·r / (β²·p + r); 0 when the denominator is 0."""
    if beta <= 0:
        raise EvaluationError(f"beta must be > 0, got {beta}")
    b2 = beta * beta
    denom = b2 * p + r
    if denom == 0:
        return 0.0
    return (1.0 + b2) * p * r / denom


@dataclass(frozen=True)
class QueryMetrics:
    question_id: str
    precision: float
    recall: float
    f1: float
    f2: float
    n_predicted: int
    n_gold: int


@dataclass
class EvalReport:
    per_question: List[QueryMetrics]
    macro: Dict[str, float]
    n_empty_prediction: int
    n_empty_gold: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "macro": dict(self.macro),
            "n_questions": len(self.per_question),
            "n_empty_prediction": self.n_empty_prediction,
            "n_empty_gold": self.n_empty_gold,
            "per_question": [asdict(m) for m in self.per_question],
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(m) for m in self.per_question], columns=list(QueryMetrics.__dataclass_fields__))

    def to_table(self) -> str:
        """Human-readable report: per-question rows then the macro line."""
        df = self.to_frame().set_index("question_id")
        macro = pd.DataFrame([self.macro], index=["MACRO"])
        table = pd.concat([df[list(METRICS)], macro[list(METRICS)]])
        return table.to_string(float_format=lambda v: f"{v:.4f}")


SelectionSource = Union[Mapping[str, AbstractSet[ArticleKey]], Any]


def _selections(run: SelectionSource) -> Mapping[str, AbstractSet[ArticleKey]]:
    # RunResult exposes .selected; plain mappings are used as-is
    return run.selected if hasattr(run, "selected") else run


def evaluate_run(run: SelectionSource, gold: Sequence[Question], beta: float = 2.0) -> EvalReport:
    """
    Score a run against gold questions; questions the run does not cover
    count as empty predictions.

    Raises:
        EvaluationError: the run references a question not in ``gold``
    """
    selections = _selections(run)
    gold_by_id = {q.question_id: q.relevant for q in gold}
    unknown = sorted(set(selections) - set(gold_by_id))
    if unknown:
        raise EvaluationError(
            f"Run references {len(unknown)} unknown question(s), e.g. {unknown[0]}"
        )

    rows: List[QueryMetrics] = []
    for qid in sorted(gold_by_id):
        pred = frozenset(selections.get(qid, frozenset()))
        truth = gold_by_id[qid]
        p, r = prf(pred, truth)
        rows.append(QueryMetrics(
            question_id=qid,
            precision=p,
            recall=r,
            f1=f_beta(p, r, 1.0),
            f2=f_beta(p, r, beta),
            n_predicted=len(pred),
            n_gold=len(truth),
        ))

    if rows:
        macro = {m: float(np.mean([getattr(row, m) for row in rows])) for m in METRICS}
    else:
        macro = {m: 0.0 for m in METRICS}
    report = EvalReport(
        per_question=rows,
        macro=macro,
        n_empty_prediction=sum(1 for row in rows if row.n_predicted == 0),
        n_empty_gold=sum(1 for row in rows if row.n_gold == 0),
    )
    logger.info(
        f"Evaluated {len(rows)} questions: P={macro['precision']:.4f} R={macro['recall']:.4f} "
        f"F2={macro['f2']:.4f} ({report.n_empty_prediction} empty predictions)"
    )
    return report


# ================================================================
# QA answers
# ================================================================


def answer_tokens(text: str) -> List[str]:
    return normalize(text, _ANSWER_NORMALIZATION).split()


def answer_f1(predicted: str, gold: str) -> float:
    """Token-multiset F1 between two answer strings."""
    pred, truth = answer_tokens(predicted), answer_tokens(gold)
    if not pred and not truth:
        return 1.0
    overlap = sum((Counter(pred) & Counter(truth)).values())
    if overlap == 0:
        return 0.0
    p = overlap / len(pred)
    r = overlap / len(truth)
    return 2 * p * r / (p + r)


def evaluate_answers(predicted: Mapping[str, str], gold: Sequence[Question]) -> Dict[str, Any]:
    """Macro answer F1 over gold records that carry an answer; unanswered predictions score 0."""
    answered = [q for q in gold if q.answer is not None]
    unknown = sorted(set(predicted) - {q.question_id for q in gold})
    if unknown:
        raise EvaluationError(f"Predictions reference unknown question(s), e.g. {unknown[0]}")
    scores = {
        q.question_id: answer_f1(predicted.get(q.question_id, ""), q.answer)
        for q in sorted(answered, key=lambda q: q.question_id)
    }
    macro = float(np.mean(list(scores.values()))) if scores else 0.0
    logger.info(f"Answer F1 over {len(scores)} records: {macro:.4f}")
    return {"macro_f1": macro, "n_questions": len(scores), "per_question": scores}


def load_answers(records: Any, source: Optional[str] = None) -> Dict[str, str]:
    """Parse ``[{"question_id", "answer"}, ...]`` into a mapping."""
    if not isinstance(records, list):
        raise EvaluationError(f"{source or 'answers'}: top level must be a JSON array")
    out: Dict[str, str] = {}
    for i, record in enumerate(records):
        if not isinstance(record, dict) or not isinstance(record.get("question_id"), str):
            raise EvaluationError(f"{source or 'answers'}: record #{i} has no question_id")
        answer = record.get("answer")
        out[record["question_id"]] = answer if isinstance(answer, str) else ""
    return out
