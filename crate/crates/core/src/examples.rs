//! Bundled example specs.

use crate::error::Result;
use crate::spec_file::{parse_spec_str, GameSpecFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundledExample {
    /// Epidemic model on four nodes, no node dynamics.
    Sird,
    /// Three market regimes with scalar node dynamics.
    StockMarket,
}

impl BundledExample {
    pub const ALL: [BundledExample; 2] = [BundledExample::Sird, BundledExample::StockMarket];

    pub fn name(self) -> &'static str {
        match self {
            BundledExample::Sird => "sird",
            BundledExample::StockMarket => "stock-market",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    pub fn file_name(self) -> &'static str {
        match self {
            BundledExample::Sird => "sird.json",
            BundledExample::StockMarket => "stock_market.json",
        }
    }

    pub fn source(self) -> &'static str {
        match self {
            BundledExample::Sird => include_str!("../data/sird.json"),
            BundledExample::StockMarket => include_str!("../data/stock_market.json"),
        }
    }

    pub fn spec(self) -> Result<GameSpecFile> {
        parse_spec_str(self.source())
    }
}
