#include "rewts/presets.hpp"

namespace rewts {

ElasticNetParams sine_params() {
    ElasticNetParams p;
    p.lambda = 1e-1;
    p.alpha = 0.5;
    return p;
}

namespace {

RunSpec base_spec(const SineDatasetSpec& spec) {
    RunSpec run;
    run.stream.chunk_length = 500;
    run.stream.horizon = 30;
    run.stream.stride = 30;
    run.stream.ensemble.lookback = 160;
    run.stream.ensemble.fit_horizon = 30;
    run.lags.input_length = 80;
    run.params = sine_params();
    run.report.normalization = Normalization::MaxAmplitude;
    run.report.tick_amplitude = tick_amplitudes(spec);
    return run;
}

}  // namespace

SineExperiment paper_sine_experiment(PaperSplit split, bool isolate_chunks) {
    const auto spec = default_paper_spec(split == PaperSplit::Train ? PaperSplit::Train : PaperSplit::Full);
    SineExperiment ex{generate_sine_dataset(spec), base_spec(spec)};
    ex.run.stream.protocol = StreamProtocol::Frozen;
    ex.run.stream.isolate_chunks = isolate_chunks;
    ex.run.stream.train_end = 8 * 500;
    ex.run.stream.eval_begin = split == PaperSplit::Test ? 8 * 500 : 0;
    return ex;
}

SineExperiment paper_sine_stream(PaperSplit split) {
    const auto spec = default_paper_spec(split);
    SineExperiment ex{generate_sine_dataset(spec), base_spec(spec)};
    ex.run.stream.protocol = StreamProtocol::Streaming;
    return ex;
}

}  // namespace rewts
