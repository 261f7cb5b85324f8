//! Answers the templated freelance questions by reading their wording.
//!
//! Deliberately independent of the task generator: it only sees question
//! text, the same as any other agent.

fn integers(text: &str) -> Vec<i64> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars().chain(std::iter::once(' ')) {
        if c.is_ascii_digit() {
            cur.push(c);
        } else if !cur.is_empty() {
            if let Ok(n) = cur.parse() {
                out.push(n);
            }
            cur.clear();
        }
    }
    out
}

/// Returns the answer text, or `None` for unrecognized questions.
pub fn solve(question: &str) -> Option<String> {
    let q = question.to_lowercase();
    let n = integers(&q);
    let answer = if q.contains("simple interest") {
        let [p, r, years] = n[..] else { return None };
        p * r * years / 100
    } else if q.contains("bought for") {
        let [buy, sell] = n[..] else { return None };
        sell - buy
    } else if q.contains("sum(i for i in range(n))") {
        let &arg = n.last()?;
        arg * (arg - 1) / 2
    } else if q.contains("for i in range(") {
        let [start, stop, step] = n[..] else { return None };
        if step <= 0 || stop <= start {
            0
        } else {
            (stop - start + step - 1) / step
        }
    } else if q.contains("average speed") {
        let [dist, hours] = n[..] else { return None };
        if hours == 0 {
            return None;
        }
        dist / hours
    } else if q.contains("area") {
        let [w, h] = n[..] else { return None };
        w * h
    } else if q.contains("notice") {
        let [served, period] = n[..] else { return None };
        served + period
    } else if q.contains("fine") {
        let [amount, pct] = n[..] else { return None };
        amount * (100 - pct) / 100
    } else {
        return None;
    };
    Some(answer.to_string())
}
