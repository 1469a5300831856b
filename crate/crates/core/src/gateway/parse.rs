#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RatingParseError {
    #[error("no integer in reply")]
    NoInteger,
    #[error("rating {value} outside {lo}-{hi}")]
    OutOfRange { value: u64, lo: u32, hi: u32 },
    #[error("invalid range {lo}-{hi}")]
    InvalidRange { lo: u32, hi: u32 },
}

/// First run of ASCII digits in `text`, rejected (not clamped) when outside
/// `lo..=hi`.
pub fn parse_scalar_rating(text: &str, lo: u32, hi: u32) -> Result<u32, RatingParseError> {
    if lo >= hi {
        return Err(RatingParseError::InvalidRange { lo, hi });
    }
    let start = text.find(|c: char| c.is_ascii_digit()).ok_or(RatingParseError::NoInteger)?;
    let digits: &str = {
        let rest = &text[start..];
        let end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
        &rest[..end]
    };
    let value = digits.parse::<u64>().unwrap_or(u64::MAX);
    if value < lo as u64 || value > hi as u64 {
        return Err(RatingParseError::OutOfRange { value, lo, hi });
    }
    Ok(value as u32)
}
