//! Seeded random factor databases and fleets.

use ecodiag::{
    Asset, AssetStatus, CableBulk, ComputeCampaign, EmissionFactor, EquipmentCategory,
    ExternalServiceEntry, FactorDatabase, Fleet, GwpEntry, HourProfile, Scope, ServerRoom,
    SourceKind, SourceMeta,
};
use rand::RngExt;

pub const FLUIDS: [&str; 3] = ["R410A", "R32", "R134a"];

/// One strictly positive factor per category.
pub fn random_db<R: RngExt + ?Sized>(rng: &mut R) -> FactorDatabase {
    let factors = EquipmentCategory::ALL
        .iter()
        .map(|&category| EmissionFactor {
            category,
            fab_transport_kgco2e: rng.random_range(0.5..2000.0),
            eol_kgco2e: rng.random_range(0.1..20.0),
            typical_power_w: rng.random_range(0.5..600.0),
            rel_uncertainty: rng.random_range(0.0..=1.0),
            source: SourceMeta {
                name: format!("src-{}", rng.random_range(0..4)),
                year: rng.random_range(2005..=2020),
                kind: SourceKind::PublicBase,
                commissioner_neutral: rng.random_bool(0.5),
                peer_reviewed: rng.random_bool(0.5),
            },
        })
        .collect();
    FactorDatabase {
        factors,
        gwp_table: FLUIDS
            .iter()
            .map(|f| GwpEntry {
                fluid: f.to_string(),
                gwp_kgco2e_per_kg: rng.random_range(100.0..4000.0),
            })
            .collect(),
        default_grid_factor_kgco2e_per_kwh: rng.random_range(0.01..1.0),
    }
}

fn asset_categories() -> Vec<EquipmentCategory> {
    EquipmentCategory::ALL
        .iter()
        .copied()
        .filter(|c| c.is_asset_category())
        .collect()
}

pub fn random_asset<R: RngExt + ?Sized>(
    rng: &mut R,
    id: String,
    year: i32,
    rooms: &[String],
) -> Asset {
    let categories = asset_categories();
    let category = categories[rng.random_range(0..categories.len())];
    let acquisition_year = rng.random_range(year - 12..=year + 1);
    let mut a = Asset::new(id, category, rng.random_range(1..=5), acquisition_year);
    if rng.random_bool(0.3) {
        a.disposal_year = Some(acquisition_year + rng.random_range(0..=8));
    }
    if rng.random_bool(0.2) {
        a.status = AssetStatus::Stored;
    }
    if rng.random_bool(0.3) {
        a.measured_power_w = Some(rng.random_range(0.0..500.0));
    }
    if rng.random_bool(0.2) {
        a.vendor_fab_transport_kgco2e = Some(rng.random_range(1.0..1500.0));
    }
    if rng.random_bool(0.15) {
        a.hour_profile_override = Some(if rng.random_bool(0.5) {
            HourProfile::WorkYear
        } else {
            HourProfile::Continuous
        });
    }
    if !rooms.is_empty() && rng.random_bool(0.5) {
        a.room = Some(rooms[rng.random_range(0..rooms.len())].clone());
    }
    a
}

/// A fleet with at most `max_entries` entries that validates without errors
/// against any database from [`random_db`].
pub fn random_fleet<R: RngExt + ?Sized>(rng: &mut R, max_entries: usize, year: i32) -> Fleet {
    let mut fleet = Fleet::new("random perimeter", year);
    let n = rng.random_range(0..=max_entries);
    let kinds: Vec<u32> = (0..n).map(|_| rng.random_range(0..10)).collect();

    for (i, _) in kinds.iter().enumerate().filter(|(_, k)| **k == 0) {
        let mut room = ServerRoom::new(format!("room-{i}"));
        if rng.random_bool(0.5) {
            room.refrigerant_fluid = Some(FLUIDS[rng.random_range(0..FLUIDS.len())].into());
            room.refrigerant_leak_kg_per_year = rng.random_range(0.1..3.0);
        }
        if rng.random_bool(0.5) {
            room.ups_overhead_fraction = rng.random_range(0.0..0.3);
        }
        if rng.random_bool(0.3) {
            room.measured_room_kwh_per_year = Some(rng.random_range(100.0..20000.0));
        }
        fleet.rooms.push(room);
    }
    let room_ids: Vec<String> = fleet.rooms.iter().map(|r| r.id.clone()).collect();

    for (i, kind) in kinds.iter().enumerate() {
        match kind {
            0 => {}
            1 => {
                let direct = rng.random_bool(0.5);
                fleet.campaigns.push(ComputeCampaign {
                    id: format!("campaign-{i}"),
                    kwh: direct.then(|| rng.random_range(0.0..5000.0)),
                    core_hours: (!direct).then(|| rng.random_range(0.0..200000.0)),
                    watts_per_core: (!direct).then(|| rng.random_range(1.0..20.0)),
                    pue: rng.random_range(1.0..2.0),
                });
            }
            2 => fleet.external_services.push(ExternalServiceEntry {
                id: format!("external-{i}"),
                declared_kgco2e: rng.random_range(0.0..500.0),
                scope_label: if rng.random_bool(0.5) {
                    Scope::S2
                } else {
                    Scope::S3
                },
                note: String::new(),
            }),
            3 => fleet.cable_bulks.push(CableBulk {
                id: format!("cable-{i}"),
                category: if rng.random_bool(0.5) {
                    EquipmentCategory::CableCat5
                } else {
                    EquipmentCategory::CableHdmi
                },
                count_acquired: rng.random_range(0..50),
                acquisition_year: rng.random_range(year - 2..=year),
            }),
            _ => {
                let asset = random_asset(rng, format!("asset-{i}"), year, &room_ids);
                fleet.assets.push(asset);
            }
        }
    }
    fleet
}
