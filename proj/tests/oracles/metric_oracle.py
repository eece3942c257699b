"""Independent reference evaluations of BLEU-4, NIST-4 and ROUGE-4 F used to
freeze the metric fixtures in tests/test_metrics.cpp.

Run: python3 tests/oracles/metric_oracle.py
"""
import math
from collections import Counter
from fractions import Fraction


def ngrams(toks, n):
    return Counter(tuple(toks[i:i + n]) for i in range(len(toks) - n + 1))


def bleu4(hyps, refs):
    match = [0] * 4
    total = [0] * 4
    c = sum(len(h) for h in hyps)
    r = sum(len(x) for x in refs)
    for h, ref in zip(hyps, refs):
        for n in range(1, 5):
            hc, rc = ngrams(h, n), ngrams(ref, n)
            match[n - 1] += sum(min(v, rc[g]) for g, v in hc.items())
            total[n - 1] += sum(hc.values())
    if c == 0 or any(m == 0 for m in match):
        return 0.0
    logp = sum(math.log(m / t) for m, t in zip(match, total)) / 4
    return math.exp(min(0.0, 1 - r / c)) * math.exp(logp)


def nist4(hyps, refs):
    # Information weights from reference-corpus counts.
    ref_counts = Counter()
    for ref in refs:
        for n in range(1, 5):
            ref_counts.update(ngrams(ref, n))
    ref_words = sum(len(x) for x in refs)

    def info(g):
        prefix = ref_counts[g[:-1]] if len(g) > 1 else ref_words
        return math.log2(prefix / ref_counts[g])

    score = 0.0
    for n in range(1, 5):
        num = 0.0
        den = 0
        for h, ref in zip(hyps, refs):
            hc, rc = ngrams(h, n), ngrams(ref, n)
            den += sum(hc.values())
            for g, v in hc.items():
                m = min(v, rc[g])
                if m:
                    num += m * info(g)
        if den:
            score += num / den
    hyp_len = sum(len(h) for h in hyps)
    ratio = min(1.0, hyp_len / ref_words)
    beta = math.log(0.5) / math.log(1.5) ** 2
    bp = math.exp(beta * math.log(ratio) ** 2) if ratio > 0 else 0.0
    return score * bp


def rouge4_f(hyps, refs):
    fs = []
    for h, ref in zip(hyps, refs):
        hc, rc = ngrams(h, 4), ngrams(ref, 4)
        if not hc and not rc:
            continue
        if not hc or not rc:
            fs.append(0.0)
            continue
        ov = sum(min(v, rc[g]) for g, v in hc.items())
        p, rr = Fraction(ov, sum(hc.values())), Fraction(ov, sum(rc.values()))
        fs.append(float(2 * p * rr / (p + rr)) if ov else 0.0)
    return sum(fs) / len(fs) if fs else 0.0


if __name__ == "__main__":
    s = str.split
    print("bleu 'a b c d' vs 'a b c d e':", repr(bleu4([s("a b c d")], [s("a b c d e")])))
    print("rouge 'a b c d e' vs 'a b c d':", repr(rouge4_f([s("a b c d e")], [s("a b c d")])))
    hyps = [s("the cat sat on the mat"), s("a dog ran in the park today")]
    refs = [s("the cat sat on a mat"), s("the dog ran in the park")]
    print("nist 2-segment fixture:", repr(nist4(hyps, refs)))
    print("bleu 2-segment fixture:", repr(bleu4(hyps, refs)))
    print("rouge 2-segment fixture:", repr(rouge4_f(hyps, refs)))
