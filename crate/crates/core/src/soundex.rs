//! American (Russell) soundex.
//!
//! Input is upper-cased and stripped of diacritics through canonical decomposition before
//! coding, so `"Stéphanie"` and `"STEPHANIE"` share a code. Non-letters are ignored.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Code returned when the input holds no letter A-Z after normalisation. It cannot collide
/// with a real code, whose first character is always a letter.
pub const NO_LETTERS: &str = "0000";

/// Digit class of an upper-case ASCII letter. `None` marks H and W, which neither code nor
/// separate; `Some(0)` marks vowels (and Y), which separate equal codes.
fn class(c: char) -> Option<u8> {
    match c {
        'B' | 'F' | 'P' | 'V' => Some(1),
        'C' | 'G' | 'J' | 'K' | 'Q' | 'S' | 'X' | 'Z' => Some(2),
        'D' | 'T' => Some(3),
        'L' => Some(4),
        'M' | 'N' => Some(5),
        'R' => Some(6),
        'H' | 'W' => None,
        _ => Some(0),
    }
}

/// Four-character soundex code of `name`: a letter followed by three digits.
pub fn soundex(name: &str) -> String {
    let mut letters = name
        .nfd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_uppercase)
        .filter(char::is_ascii_uppercase);

    let Some(first) = letters.next() else {
        return NO_LETTERS.to_string();
    };

    let mut code = String::with_capacity(4);
    code.push(first);
    let mut last = class(first);
    for c in letters {
        if code.len() == 4 {
            break;
        }
        match class(c) {
            // H and W are transparent: the previous class survives across them
            None => {}
            Some(0) => last = Some(0),
            Some(d) => {
                if last != Some(d) {
                    code.push(char::from(b'0' + d));
                }
                last = Some(d);
            }
        }
    }
    while code.len() < 4 {
        code.push('0');
    }
    code
}
