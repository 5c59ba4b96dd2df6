//! Bundled sample inputs. Factor values are illustrative, not a reference.

/// Sample factor file covering every category.
pub const FACTORS: &str = include_str!("../samples/factors.txt");
/// GATE-scale sample fleet for reporting year 2019.
pub const FLEET: &str = include_str!("../samples/fleet.csv");
/// Mapping rules for GLPI exports.
pub const RULES: &str = include_str!("../samples/rules.csv");
/// Small GLPI export.
pub const GLPI: &str = include_str!("../samples/glpi.csv");
/// Server replacement scenario for the sample fleet.
pub const ACTIONS: &str = include_str!("../samples/actions.csv");

/// `(file name, contents)` pairs written by `ecodiag init`.
pub const ALL: [(&str, &str); 5] = [
    ("factors.txt", FACTORS),
    ("fleet.csv", FLEET),
    ("rules.csv", RULES),
    ("glpi.csv", GLPI),
    ("actions.csv", ACTIONS),
];
