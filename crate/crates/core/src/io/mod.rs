//! File formats and serialization.

mod bundle;
mod location_scale;
mod report;

pub use bundle::{
    decode_binary, encode_binary, format_bundle, load_bundle, parse_bundle, save_bundle, save_bundle_binary,
    AnyBundle, MatrixBundle,
};
pub use location_scale::{scale_location_barycenter, w2_distance_sq, LocationScaleMeasure};
pub use report::{read_report, report_to_json, write_csv, write_report, REPORT_SCHEMA_JSON};
