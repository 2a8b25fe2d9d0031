#pragma once

#include "rewts/eval.hpp"
#include "rewts/synthetic.hpp"

namespace rewts {

/// Elastic-net settings used for the sine experiments.
ElasticNetParams sine_params();

struct SineExperiment {
    SineDataset data;
    RunSpec run;
};

/// Eight-chunk sine experiment with l_c = 500, l_b = 160, h = h_fit = s = 30
/// and 80 target lags, normalised by the largest amplitude. One model per
/// train chunk, all trained before evaluation.
///
/// Train evaluates the train series; Test and Full run on the continuous
/// sixteen-chunk series, evaluating the test half or all of it. With
/// `isolate_chunks` each chunk is forecast on its own data only.
SineExperiment paper_sine_experiment(PaperSplit split, bool isolate_chunks);

/// The same series and settings run as a growing stream (models accrue).
SineExperiment paper_sine_stream(PaperSplit split);

}  // namespace rewts
