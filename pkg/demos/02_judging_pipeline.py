"""One caption, end to end: prompt, verdict, normalization, composition.

A judging call renders the prompt template with the candidate caption and
its references, asks a chat backend for a schema verdict, normalizes the
integer score to [0, 1], and composes it with a small epsilon-weighted
tie-breaker so equal model scores still order deterministically.

Run:  python3 demos/02_judging_pipeline.py
"""

from capjudge.backends.mocks import ScriptedChatBackend
from capjudge.digests import prompt_digest
from capjudge.judge import (
    CaptionInput,
    compose_score,
    ensemble_judge,
    judge,
    load_template,
    normalize_verdict,
    parse_verdict,
    render_prompt,
)
from capjudge.tiebreak import gamma_random


def main() -> None:
    caption_input = CaptionInput(
        candidate="a dog barks twice in the distance",
        references=("a dog barking far away", "distant barking"),
    )
    template = load_template("en")
    prompt = render_prompt(template, caption_input)
    print("Rendered judge prompt:")
    print("-" * 60)
    print(prompt)
    print("-" * 60)

    raw = '{"score": 78, "reason": "same event, extra count detail"}'
    verdict = parse_verdict(raw)
    print(f"\nStrict parse of {raw!r}:")
    print(f"  score={verdict.score}  reason={verdict.reason!r}")

    fenced = '```json\n{"score": 78, "reason": "wrapped in a fence"}\n```'
    recovered = parse_verdict(fenced, lenient=True)
    print(
        "Lenient parse recovers a verdict a remote model wrapped in a "
        f"markdown fence: score={recovered.score}"
    )

    llm = normalize_verdict(verdict)
    gamma = gamma_random(caption_input)
    composite = compose_score(llm, gamma, 0.25, reason=verdict.reason)
    print(
        f"\nNormalized llm score {llm:.4f}, content-hash tie-breaker "
        f"{gamma:.4f}, epsilon 0.25:"
    )
    print(f"  composite value = llm + epsilon * gamma = {composite.value:.6f}")
    print(
        "With epsilon below the score granularity (e.g. 0.0001 against the "
        "1/100 score grid) the tie-breaker separates exact ties but can "
        "never overturn a genuine score difference; larger epsilons like "
        "0.25 deliberately blend the two signals."
    )

    # A scripted backend replays canned outputs keyed by prompt digest —
    # the same mechanism the shipped fixtures use.
    backend = ScriptedChatBackend(
        {prompt_digest(prompt): raw}, backend_id="demo-script"
    )
    score = judge(caption_input, backend, template, gamma_random, 0.0001)
    print(f"\njudge() with a scripted backend: value={score.value:.6f}")

    second = ScriptedChatBackend(
        {prompt_digest(prompt): '{"score": 66, "reason": "stricter read"}'},
        backend_id="demo-script-2",
    )
    ensemble = ensemble_judge(
        caption_input, [backend, second], template, gamma_random, 0.0001
    )
    members = ", ".join(
        f"{m.model_id}={m.llm:.2f}" for m in ensemble.per_model
    )
    print(
        f"ensemble_judge() averages member scores ({members}) before "
        f"composing: value={ensemble.value:.6f}, reason={ensemble.reason!r}"
    )


if __name__ == "__main__":
    main()
