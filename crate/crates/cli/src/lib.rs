//! Scenario runner for the `weakosc` command: JSON configs in, CSV rows and
//! JSON records out.

pub mod config;
pub mod error;
pub mod presets;
pub mod record;
pub mod scenarios;
pub mod sweep;

pub use config::{ScenarioConfig, ScenarioKind, WindowSpec};
pub use error::{Issue, ScenarioError};
pub use record::{ResultRecord, Row};
pub use scenarios::run;
pub use sweep::sweep;
