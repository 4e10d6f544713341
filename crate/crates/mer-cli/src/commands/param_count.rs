//! `mer param-count`: trainable parameter count for a configuration.

use mer_core::error::Result;
use mer_core::model::{Model, ModelSpec};

use crate::ParamCountArgs;

pub fn run(args: ParamCountArgs) -> Result<()> {
    let mut spec = ModelSpec::new(args.feature_dim);
    if let Some(b) = args.branched {
        spec.branched = b;
    }
    if let Some(c) = args.cnn_filters {
        spec.cnn_filters = c;
    }
    if let Some(u) = args.fc_units {
        spec.fc_units = u;
    }
    if let Some(h) = args.gru_units {
        spec.gru_units = h;
    }
    if let Some(k) = args.maxout_pieces {
        spec.maxout_pieces = k;
    }
    spec.validate()?;
    eprintln!(
        "feature_dim {} cnn {} fc {} gru {} maxout {} {}",
        spec.feature_dim,
        spec.cnn_filters,
        spec.fc_units,
        spec.gru_units,
        spec.maxout_pieces,
        if spec.branched { "branched" } else { "unbranched" },
    );
    println!("{}", Model::count_params(&spec));
    Ok(())
}
