//! Worked demonstrations built on the scenario format.

pub mod dpp;
pub mod forward;
pub mod villa;

pub use dpp::{run_dpp, DppReport, Market, Strategy, BINOMIAL_SCENARIO};
pub use forward::{run_forward_check, ForwardReport};
pub use villa::{run_villa, VillaReport, VillaVariant, VILLA_SCENARIO};

#[cfg(test)]
mod tests {
    use crate::scenario::Scenario;

    #[test]
    fn shipped_scenarios_are_canonical() {
        for text in [super::VILLA_SCENARIO, super::BINOMIAL_SCENARIO] {
            assert_eq!(Scenario::parse(text).unwrap().render(), text);
        }
    }
}
