//! Brute-force totals for a fleet, written without the engine.
//!
//! Category rules are restated here from the taxonomy table rather than read
//! from `EquipmentCategory`, so a wrong mask or hour profile in the library
//! shows up as a disagreement.

use ecodiag::{AssetStatus, FactorDatabase, Fleet, HourProfile, Scope};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OracleTotals {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub fabrication: f64,
    pub usage: f64,
    pub end_of_life: f64,
    pub fugitive: f64,
    pub declared: f64,
}

impl OracleTotals {
    pub fn total(&self) -> f64 {
        self.s1 + self.s2 + self.s3
    }
}

fn allows(category: &str, scope: &str) -> bool {
    let mask: &[&str] = match category {
        "air_conditioner" => &["S1", "S2"],
        "ups" | "compute_campaign" => &["S2"],
        "cable_cat5" | "cable_hdmi" => &["S3"],
        _ => &["S2", "S3"],
    };
    mask.contains(&scope)
}

fn default_hours(category: &str) -> f64 {
    match category {
        "server" | "workstation_24x7" | "network_switch" | "router" | "storage_array" | "ups"
        | "air_conditioner" | "ip_phone" | "wifi_ap" => 8760.0,
        "cable_cat5" | "cable_hdmi" | "compute_campaign" => 0.0,
        _ => 1607.0,
    }
}

/// Expects a merged database (one factor per category).
pub fn oracle_totals(fleet: &Fleet, db: &FactorDatabase, grid: f64) -> OracleTotals {
    let y = fleet.reporting_year;
    let mut t = OracleTotals::default();
    let factor = |id: &str| {
        let found: Vec<_> = db
            .factors
            .iter()
            .filter(|f| f.category.id() == id)
            .collect();
        assert_eq!(found.len(), 1, "oracle needs exactly one factor for {id}");
        found[0]
    };

    let mut room_kwh: Vec<(String, f64)> =
        fleet.rooms.iter().map(|r| (r.id.clone(), 0.0)).collect();

    for a in &fleet.assets {
        let id = a.category.id();
        let f = factor(id);
        let q = a.quantity as f64;
        let present = a.acquisition_year <= y && a.disposal_year.is_none_or(|d| d >= y);

        if present && allows(id, "S2") {
            let hours = if a.status == AssetStatus::Stored {
                0.0
            } else {
                match a.hour_profile_override {
                    Some(HourProfile::WorkYear) => 1607.0,
                    Some(HourProfile::Continuous) => 8760.0,
                    _ => default_hours(id),
                }
            };
            let power = a.measured_power_w.unwrap_or(f.typical_power_w);
            let kwh = q * power * hours / 1000.0;
            let room = a
                .room
                .as_ref()
                .and_then(|r| fleet.rooms.iter().find(|room| &room.id == r));
            match room {
                Some(room) if room.measured_room_kwh_per_year.is_some() => {}
                Some(room) => {
                    t.s2 += kwh * grid;
                    t.usage += kwh * grid;
                    room_kwh.iter_mut().find(|(r, _)| r == &room.id).unwrap().1 += kwh;
                }
                None => {
                    t.s2 += kwh * grid;
                    t.usage += kwh * grid;
                }
            }
        }
        if a.acquisition_year == y && allows(id, "S3") {
            let v = q * a
                .vendor_fab_transport_kgco2e
                .unwrap_or(f.fab_transport_kgco2e);
            t.s3 += v;
            t.fabrication += v;
        }
        if a.disposal_year == Some(y) && allows(id, "S3") {
            let v = q * f.eol_kgco2e;
            t.s3 += v;
            t.end_of_life += v;
        }
    }

    for room in &fleet.rooms {
        if room.refrigerant_leak_kg_per_year > 0.0 {
            let fluid = room.refrigerant_fluid.as_deref().unwrap();
            let gwp = db
                .gwp_table
                .iter()
                .find(|g| g.fluid == fluid)
                .unwrap()
                .gwp_kgco2e_per_kg;
            let v = room.refrigerant_leak_kg_per_year * gwp;
            t.s1 += v;
            t.fugitive += v;
        }
        let v = match room.measured_room_kwh_per_year {
            Some(kwh) => kwh * grid,
            None => {
                let kwh = room_kwh.iter().find(|(r, _)| r == &room.id).unwrap().1;
                room.ups_overhead_fraction * kwh * grid
            }
        };
        t.s2 += v;
        t.usage += v;
    }

    for c in &fleet.campaigns {
        let kwh = match c.kwh {
            Some(k) => k,
            None => c.core_hours.unwrap() * c.watts_per_core.unwrap() / 1000.0 * c.pue,
        };
        t.s2 += kwh * grid;
        t.usage += kwh * grid;
    }

    for c in &fleet.cable_bulks {
        if c.count_acquired > 0 && c.acquisition_year == y {
            let v = c.count_acquired as f64 * factor(c.category.id()).fab_transport_kgco2e;
            t.s3 += v;
            t.fabrication += v;
        }
    }

    for e in &fleet.external_services {
        match e.scope_label {
            Scope::S2 => t.s2 += e.declared_kgco2e,
            _ => t.s3 += e.declared_kgco2e,
        }
        t.declared += e.declared_kgco2e;
    }
    t
}
