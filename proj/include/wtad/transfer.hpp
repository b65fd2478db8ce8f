#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "wtad/detector.hpp"
#include "wtad/error.hpp"
#include "wtad/ingest.hpp"
#include "wtad/neural.hpp"

namespace wtad {

enum class TransferMethod { Threshold, Decoder, FullAutoencoder };

inline std::string_view to_string(TransferMethod m) {
  switch (m) {
    case TransferMethod::Threshold: return "threshold";
    case TransferMethod::Decoder: return "decoder";
    case TransferMethod::FullAutoencoder: return "ae";
  }
  return "threshold";
}

inline std::optional<TransferMethod> parse_transfer_method(std::string_view s) {
  if (s == "threshold") return TransferMethod::Threshold;
  if (s == "decoder") return TransferMethod::Decoder;
  if (s == "ae") return TransferMethod::FullAutoencoder;
  return std::nullopt;
}

/// Fine-tuning settings. When `learning_rate` is unset the method default
/// applies: 1e-3 for the decoder, 1e-4 (a tenth of the base rate) for the
/// full autoencoder.
struct TransferConfig {
  TransferMethod method = TransferMethod::Decoder;
  std::size_t epochs = 10;
  std::optional<double> learning_rate;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  std::string target_turbine;

  double effective_learning_rate() const {
    if (learning_rate) return *learning_rate;
    return method == TransferMethod::FullAutoencoder ? 1e-4 : 1e-3;
  }
};

namespace detail {

inline LineageEntry lineage_for(const TransferConfig& config, const ScadaFrame& tuning_frame) {
  LineageEntry e;
  e.method = std::string(to_string(config.method));
  e.target_turbine = config.target_turbine;
  e.seed = config.seed;
  if (!tuning_frame.empty()) {
    e.tuning_start = format_instant(tuning_frame.timestamps().front());
    e.tuning_end = format_instant(tuning_frame.timestamps().back() + kSampleInterval);
  }
  return e;
}

inline void refit_threshold(DetectorModel& model, const ScadaFrame& tuning_frame, const LabelSeries& labels) {
  if (labels.size() != tuning_frame.rows()) throw Error(ErrorKind::LengthMismatch, "labels not aligned to frame");
  model.threshold = std::max(0.0, fit_threshold(anomaly_scores(model, tuning_frame), labels));
}

/// Fine-tunes `model.network` on the normal tuning rows with a fresh Adam
/// state, keeping the `frozen` group fixed. The pipeline is reused as is.
inline DetectorModel fine_tune(const DetectorModel& source, const ScadaFrame& tuning_frame, const LabelSeries& labels,
                               const TransferConfig& config, FreezeGroup frozen) {
  if (labels.size() != tuning_frame.rows()) throw Error(ErrorKind::LengthMismatch, "labels not aligned to frame");
  const double lr = config.effective_learning_rate();
  if (!(lr > 0.0)) throw Error(ErrorKind::BadSpec, "fine-tuning learning rate must be positive");

  DetectorModel model = source;
  const ScadaFrame normal = select_normal(tuning_frame, labels);
  const Matrix data = to_matrix(apply_pipeline(model.pipeline, normal));

  LineageEntry entry = lineage_for(config, tuning_frame);
  entry.epochs = config.epochs;
  entry.learning_rate = lr;
  entry.tuning_mse_before = reconstruction_mse(model.network, data);
  if (config.epochs > 0) {
    freeze(model.network, frozen);
    train_autoencoder(model.network, data, TrainOptions{config.epochs, config.batch_size, lr, config.seed});
    freeze(model.network, FreezeGroup::None);
  }
  entry.tuning_mse_after = reconstruction_mse(model.network, data);

  refit_threshold(model, tuning_frame, labels);
  model.metadata.lineage.push_back(std::move(entry));
  return model;
}

}  // namespace detail

/// Reuses the source autoencoder unchanged and refits only the threshold.
inline DetectorModel transfer_threshold(const DetectorModel& source, const ScadaFrame& tuning_frame,
                                        const LabelSeries& labels, const TransferConfig& config = {}) {
  DetectorModel model = source;
  detail::refit_threshold(model, tuning_frame, labels);
  LineageEntry entry = detail::lineage_for(config, tuning_frame);
  entry.method = std::string(to_string(TransferMethod::Threshold));
  model.metadata.lineage.push_back(std::move(entry));
  return model;
}

/// Fine-tunes the decoder with the encoder frozen, then refits the threshold.
inline DetectorModel transfer_decoder(const DetectorModel& source, const ScadaFrame& tuning_frame,
                                      const LabelSeries& labels, TransferConfig config) {
  config.method = TransferMethod::Decoder;
  return detail::fine_tune(source, tuning_frame, labels, config, FreezeGroup::Encoder);
}

/// Fine-tunes every layer, then refits the threshold.
inline DetectorModel transfer_full_ae(const DetectorModel& source, const ScadaFrame& tuning_frame,
                                      const LabelSeries& labels, TransferConfig config) {
  config.method = TransferMethod::FullAutoencoder;
  return detail::fine_tune(source, tuning_frame, labels, config, FreezeGroup::None);
}

inline DetectorModel transfer(const DetectorModel& source, const ScadaFrame& tuning_frame, const LabelSeries& labels,
                              const TransferConfig& config) {
  switch (config.method) {
    case TransferMethod::Threshold: return transfer_threshold(source, tuning_frame, labels, config);
    case TransferMethod::Decoder: return transfer_decoder(source, tuning_frame, labels, config);
    case TransferMethod::FullAutoencoder: return transfer_full_ae(source, tuning_frame, labels, config);
  }
  throw Error(ErrorKind::BadSpec, "unknown transfer method");
}

}  // namespace wtad
