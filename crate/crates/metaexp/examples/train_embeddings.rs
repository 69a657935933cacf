// Train listing demand embeddings from co-view sessions.
//
// Two groups of listings are only ever viewed together within their own
// group; training pulls each group together in embedding space, which is
// exactly the structure downstream clustering consumes.
//
// Usage: `cargo run --release --example train_embeddings`

use metaexp::datamodel::{ListingRecord, SearchSession, TenureClass};
use metaexp::embed::{cosine, train_embeddings, EmbedConfig};

fn listing(id: &str, market: &str) -> ListingRecord {
    ListingRecord {
        listing_id: id.to_string(),
        market_id: market.to_string(),
        eligible: true,
        tenure_class: TenureClass::LongTenured,
        pre_bookings: 0,
        pre_nights: 0,
        pre_booking_value: 0.0,
        pre_gross_spend: 0.0,
        smart_pricing_on: false,
        supply_elasticity_index: None,
        demand_elasticity_index: None,
    }
}

pub fn run(epochs: usize) -> metaexp::Result<()> {
    let beach: Vec<String> = (0..12).map(|i| format!("beach_{i:02}")).collect();
    let city: Vec<String> = (0..12).map(|i| format!("city_{i:02}")).collect();
    let mut listings = Vec::new();
    for id in &beach {
        listings.push(listing(id, "coastal"));
    }
    for id in &city {
        listings.push(listing(id, "downtown"));
    }

    // Users browse within one taste group per session.
    let mut sessions = Vec::new();
    for round in 0..25usize {
        for (group, booked) in [(&beach, round % 3 == 0), (&city, round % 4 == 0)] {
            let mut viewed = group.clone();
            let n = viewed.len();
            viewed.rotate_left(round % n);
            viewed.truncate(8);
            sessions.push(SearchSession {
                user_id: format!("u{round}_{}", group[0]),
                listings_viewed: viewed,
                booked,
            });
        }
    }

    let config = EmbedConfig { dim: 8, epochs, seed: 7, ..EmbedConfig::default() };
    let (matrix, train_report) = train_embeddings(&sessions, &listings, &config, 1)?;

    println!(
        "trained {} listings x {} dims over {} epochs ({} pairs/epoch)",
        matrix.len(),
        matrix.dim,
        epochs,
        train_report.pairs_per_epoch
    );
    let first = train_report.epoch_losses.first().copied().unwrap_or(f64::NAN);
    let last = train_report.epoch_losses.last().copied().unwrap_or(f64::NAN);
    println!("mean pair loss: {first:.4} (epoch 1) -> {last:.4} (epoch {epochs})");

    let pair_cos = |a: &str, b: &str| {
        cosine(matrix.vector(a).unwrap(), matrix.vector(b).unwrap())
    };
    let within = pair_cos("beach_00", "beach_05");
    let across = pair_cos("beach_00", "city_05");
    println!("cosine(beach_00, beach_05) = {within:+.3}   (co-viewed)");
    println!("cosine(beach_00, city_05)  = {across:+.3}   (never co-viewed)");
    assert!(within > across, "co-viewed listings should sit closer");
    println!(
        "negative sampling stayed in-market: {} cross-market draws of {}",
        train_report.cross_market_draws, train_report.negative_draws
    );
    Ok(())
}

fn main() -> metaexp::Result<()> {
    run(40)
}
