"""The five model-class families and how each encodes keywords and applies
the keyword-loss term."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ModelClass:
    """Training policy for one model class.

    encode_keywords: how many extracted keywords enter the input block
    ("none", "single", "multi"). loss_mode: which keyword-loss family member
    applies (None disables the term). pool_source: where similarity pools
    come from ("none", "embedding", "lexicon"). kwpred: keyword-prediction
    model (targets are keyword lists, not responses).
    """

    name: str
    encode_keywords: str
    loss_mode: str | None
    pool_source: str = "none"
    kwpred: bool = False


MODEL_CLASSES = {
    c.name: c
    for c in (
        ModelClass("no_kw", "none", None),
        ModelClass("kw_context", "single", None),
        ModelClass("kw_loss", "single", "plain"),
        ModelClass("kw_sim_loss_glove", "single", "sim", "embedding"),
        ModelClass("kw_sim_loss_glove_1", "single", "sim_unit", "embedding"),
        ModelClass("kw_sim_loss_lexicon", "single", "sim", "lexicon"),
        ModelClass("kw_sim_loss_lexicon_1", "single", "sim_unit", "lexicon"),
        ModelClass("multi_kw_loss", "multi", "multi"),
        ModelClass("multi_kw_sim_loss_glove", "multi", "multi_sim", "embedding"),
        ModelClass("multi_kw_sim_loss_glove_1", "multi", "multi_sim_unit", "embedding"),
        ModelClass("multi_kw_sim_loss_lexicon", "multi", "multi_sim", "lexicon"),
        ModelClass("multi_kw_sim_loss_lexicon_1", "multi", "multi_sim_unit", "lexicon"),
        ModelClass("kwpred", "none", None, kwpred=True),
    )
}


def example_keywords(model_class: ModelClass, keywords: list[str]) -> list[str]:
    """Which of an example's extracted keywords condition the input."""
    if model_class.encode_keywords == "none" or not keywords:
        return []
    if model_class.encode_keywords == "single":
        return keywords[:1]
    return keywords[:3]
