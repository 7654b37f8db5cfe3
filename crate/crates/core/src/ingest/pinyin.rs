use super::IngestError;

/// Maps a numeric-notation pinyin syllable to its tone index in `1..=5`.
///
/// A trailing `1`-`4` is the lexical tone; a trailing `5`, `0`, or no digit
/// is the neutral tone 5. Tone-mark (diacritic) spellings are rejected.
pub fn pinyin_tone(syllable: &str) -> Result<u8, IngestError> {
    let invalid = || IngestError::InvalidPinyin(syllable.to_string());
    let s = syllable.trim();
    if s.is_empty() {
        return Err(invalid());
    }

    let (body, tone) = match s.chars().last() {
        Some(c) if c.is_ascii_digit() => {
            let tone = match c {
                '1'..='5' => c as u8 - b'0',
                '0' => 5,
                _ => return Err(invalid()),
            };
            (&s[..s.len() - 1], tone)
        }
        _ => (s, 5),
    };

    let valid_body = !body.is_empty()
        && body
            .chars()
            .all(|c| c.is_ascii_alphabetic() || matches!(c, 'ü' | 'Ü' | ':'));
    if !valid_body {
        return Err(invalid());
    }
    Ok(tone)
}
