//! Code-point addressed string helpers.
//!
//! Offsets throughout the crate count Unicode scalar values, never bytes.

/// Number of code points in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Byte index of the code point at `char_idx`, or `s.len()` when
/// `char_idx` equals the code-point length. `None` past the end.
pub fn byte_offset(s: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    let mut count = 0;
    for (b, _) in s.char_indices() {
        if count == char_idx {
            return Some(b);
        }
        count += 1;
    }
    (count == char_idx).then_some(s.len())
}

/// Slice `len` code points starting at code point `start`.
pub fn slice_chars(s: &str, start: usize, len: usize) -> Option<&str> {
    let from = byte_offset(s, start)?;
    let rest = &s[from..];
    let to = byte_offset(rest, len)?;
    Some(&rest[..to])
}

/// Converts byte offsets to code-point offsets for a single string in one
/// pass. Offsets must be queried in non-decreasing order.
pub(crate) struct CharCursor<'a> {
    s: &'a str,
    byte: usize,
    chars: usize,
}

impl<'a> CharCursor<'a> {
    pub(crate) fn new(s: &'a str) -> Self {
        Self { s, byte: 0, chars: 0 }
    }

    pub(crate) fn advance_to(&mut self, byte: usize) -> usize {
        debug_assert!(byte >= self.byte);
        self.chars += self.s[self.byte..byte].chars().count();
        self.byte = byte;
        self.chars
    }
}

/// Code-point offsets of every occurrence of `needle` in `haystack`,
/// including overlapping ones.
pub fn find_all_chars(haystack: &str, needle: &str) -> Vec<usize> {
    if needle.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cursor = CharCursor::new(haystack);
    let mut from = 0;
    while let Some(rel) = haystack[from..].find(needle) {
        let at = from + rel;
        out.push(cursor.advance_to(at));
        let step = haystack[at..].chars().next().map_or(1, char::len_utf8);
        from = at + step;
    }
    out
}
