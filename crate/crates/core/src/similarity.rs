//! Phrase similarity scorers.

use crate::scalar::Score;

/// A symmetric similarity in `[0, 1]` between two strings.
///
/// Implementations are shared across pipeline workers. One that cannot take
/// concurrent calls (a remote embedding client with a single connection,
/// say) must serialize internally and report so through
/// [`Similarity::concurrent`].
pub trait Similarity<S: Score>: Send + Sync {
    fn similarity(&self, a: &str, b: &str) -> S;

    fn concurrent(&self) -> bool {
        true
    }
}

impl<S: Score, F> Similarity<S> for F
where
    F: Fn(&str, &str) -> S + Send + Sync,
{
    fn similarity(&self, a: &str, b: &str) -> S {
        self(a, b)
    }
}

/// Equal blend of whitespace-token F1 and code-point bigram Dice, both on
/// trimmed input.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LexicalSimilarity;

impl<S: Score> Similarity<S> for LexicalSimilarity {
    fn similarity(&self, a: &str, b: &str) -> S {
        let (a, b) = (a.trim(), b.trim());
        S::half() * token_f1(a, b) + S::half() * bigram_dice(a, b)
    }
}

/// Size of the multiset intersection of two sorted slices.
fn sorted_overlap<T: Ord>(a: &[T], b: &[T]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Token-overlap F1 on whitespace tokens, multiset semantics. Zero when
/// either side has no tokens.
pub fn token_f1<S: Score>(a: &str, b: &str) -> S {
    let mut ta: Vec<&str> = a.split_whitespace().collect();
    let mut tb: Vec<&str> = b.split_whitespace().collect();
    if ta.is_empty() || tb.is_empty() {
        return S::zero();
    }
    ta.sort_unstable();
    tb.sort_unstable();
    let common = sorted_overlap(&ta, &tb);
    if common == 0 {
        return S::zero();
    }
    S::ratio(2 * common, ta.len() + tb.len())
}

/// Dice coefficient over code-point bigram multisets. Strings too short to
/// have a bigram score 1 against an identical string and 0 otherwise.
pub fn bigram_dice<S: Score>(a: &str, b: &str) -> S {
    let ba = bigrams(a);
    let bb = bigrams(b);
    if ba.is_empty() || bb.is_empty() {
        return if ba.is_empty() && bb.is_empty() && !a.is_empty() && a == b { S::one() } else { S::zero() };
    }
    S::ratio(2 * sorted_overlap(&ba, &bb), ba.len() + bb.len())
}

fn bigrams(s: &str) -> Vec<(char, char)> {
    let mut out: Vec<(char, char)> = s.chars().zip(s.chars().skip(1)).collect();
    out.sort_unstable();
    out
}
