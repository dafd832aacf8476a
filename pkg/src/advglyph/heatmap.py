"""Static HTML heatmaps of interpretation maps.

Self-contained documents, no scripts or external assets: each token is a span
whose background runs from white (score 0) to red (score 1). Used by the CLI
to give explanations and attack traces a visual form.
"""

from __future__ import annotations

import html

from .interpret import InterpretationMap, normalize_scores

_PAGE = """<!DOCTYPE html>
<html>
<head>
<meta charset="utf-8">
<title>{title}</title>
<style>
body {{ font-family: Georgia, serif; margin: 2rem; max-width: 60rem; }}
h1 {{ font-size: 1.2rem; }}
h2 {{ font-size: 1rem; margin-bottom: 0.3rem; }}
p.meta {{ color: #555; font-size: 0.9rem; }}
div.tokens {{ line-height: 2.1; border: 1px solid #ddd; padding: 0.8rem; border-radius: 4px; }}
span.tok {{ padding: 0.15rem 0.25rem; margin: 0 0.05rem; border-radius: 3px; }}
</style>
</head>
<body>
<h1>{title}</h1>
{body}
</body>
</html>
"""


def _token_spans(m: InterpretationMap) -> str:
    norm = normalize_scores(m)
    spans = []
    for token, score in zip(norm.tokens, norm.scores):
        alpha = float(score)
        spans.append(
            f'<span class="tok" style="background: rgba(214, 40, 40, {alpha:.3f})" '
            f'title="{alpha:.3f}">{html.escape(token)}</span>'
        )
    return '<div class="tokens">' + " ".join(spans) + "</div>"


def heatmap_html(m: InterpretationMap, title: str = "Interpretation map") -> str:
    """One map as a standalone HTML page."""
    meta = (
        f'<p class="meta">interpreter: {html.escape(m.interpreter_id)}, '
        f"target class: {m.target_class}, tokens: {len(m)}</p>"
    )
    return _PAGE.format(title=html.escape(title), body=meta + _token_spans(m))


def comparison_html(
    benign: InterpretationMap,
    adversarial: InterpretationMap,
    title: str = "Attack comparison",
    note: str = "",
) -> str:
    """Benign and adversarial maps stacked on one page."""
    parts = []
    if note:
        parts.append(f'<p class="meta">{html.escape(note)}</p>')
    parts.append("<h2>Benign</h2>")
    parts.append(_token_spans(benign))
    parts.append("<h2>Adversarial</h2>")
    parts.append(_token_spans(adversarial))
    return _PAGE.format(title=html.escape(title), body="\n".join(parts))
