//! Format-to-format conversion through the canonical model.

use std::collections::BTreeSet;

use crate::error::{CodecError, UnknownFormatName};
use crate::formats::{self, CodecWarning, FormatId};
use crate::framework::{format_capabilities, SpecId};
use crate::loss::LossReport;
use crate::model::OCLog;

#[derive(Debug, Clone)]
pub struct Conversion {
    pub output: Vec<u8>,
    /// What the target could not hold.
    pub loss: LossReport,
    /// Ambiguities found in the source while reading.
    pub warnings: Vec<CodecWarning>,
    /// The decoded source, as the loss report refers to it.
    pub decoded: OCLog,
}

pub fn convert(input: &[u8], source: FormatId, target: FormatId) -> Result<Conversion, CodecError> {
    let (decoded, warnings) = formats::read(source, input)?;
    let (output, loss) = formats::write(target, &decoded);
    Ok(Conversion {
        output,
        loss,
        warnings,
        decoded,
    })
}

/// Specifications a conversion from `source` to `target` may lose.
///
/// Every specification the source supports and the target does not, plus
/// change traceability when the source may key changes by time alone but
/// the target needs a causing event for every change.
pub fn loss_preview(source: &str, target: &str) -> Result<BTreeSet<SpecId>, UnknownFormatName> {
    let from = format_capabilities(source)?;
    let to = format_capabilities(target)?;
    let mut at_risk: BTreeSet<SpecId> = SpecId::ALL
        .iter()
        .copied()
        .filter(|&s| from.supports(s) && !to.supports(s))
        .collect();
    if from.supports(SpecId::S8)
        && from.change_tracking.permits_uncaused()
        && to.change_tracking.requires_cause()
    {
        at_risk.insert(SpecId::S8);
    }
    Ok(at_risk)
}

pub fn loss_preview_ids(source: FormatId, target: FormatId) -> BTreeSet<SpecId> {
    loss_preview(source.name(), target.name()).expect("codec formats have descriptors")
}

#[cfg(test)]
mod tests {
    use super::*;
    use SpecId::*;

    #[test]
    fn previews() {
        assert_eq!(
            loss_preview("OCEL2", "OCEL1").unwrap(),
            [S8, S9, S10].into()
        );
        assert!(loss_preview("ROCEL", "ROCEL").unwrap().is_empty());
        assert_eq!(
            loss_preview("DOCEL", "OCEL2").unwrap(),
            [S13, S14, S16, S17].into()
        );
        assert_eq!(
            loss_preview("OCEL2", "DOCEL").unwrap(),
            [S8, S9, S10].into()
        );
        assert!(loss_preview("OCEL2", "NOPE").is_err());
    }

    #[test]
    fn preview_is_empty_towards_the_refined_format_except_cardinality() {
        for f in crate::framework::MATRIX_FORMATS {
            let risk = loss_preview(f, "ROCEL").unwrap();
            assert!(risk.is_subset(&[S13, S14].into()), "{f}: {risk:?}");
        }
    }
}
