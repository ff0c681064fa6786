#include "proxyseg/curriculum.hpp"

#include <cmath>
#include <string>

#include "proxyseg/errors.hpp"

namespace proxyseg {
namespace {

void check_epoch(const CurriculumConfig& config, int epoch) {
  if (epoch < 0 || epoch >= config.e_max) {
    throw ConfigError("epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(config.e_max) + ")");
  }
}

double linear_ramp(double start, double end, int ramp_epochs, int epoch) {
  if (epoch >= ramp_epochs) return end;
  if (epoch == 0) return start;
  return start + (end - start) * static_cast<double>(epoch) / static_cast<double>(ramp_epochs);
}

void check_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string("curriculum: ") + name + " must lie in [0, 1]");
}

}  // namespace

void CurriculumConfig::validate() const {
  check_unit(gamma_start, "gamma_start");
  check_unit(gamma_end, "gamma_end");
  check_unit(rho_start, "rho_start");
  check_unit(rho_end, "rho_end");
  if (e_max <= 0) throw ConfigError("curriculum: e_max must be positive");
  if (gamma_ramp_epochs < 0 || gamma_ramp_epochs > e_max) throw ConfigError("curriculum: gamma_ramp_epochs must lie in [0, e_max]");
  if (rho_ramp_epochs < 0 || rho_ramp_epochs > e_max) throw ConfigError("curriculum: rho_ramp_epochs must lie in [0, e_max]");
  if (alpha0_encoder < 0.0 || alpha0_decoder < 0.0) throw ConfigError("curriculum: learning rates must be non-negative");
  if (delta < 0.0) throw ConfigError("curriculum: delta must be non-negative");
  if (beta < 0.0) throw ConfigError("curriculum: beta must be non-negative");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("curriculum: momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("curriculum: weight_decay must be non-negative");
}

double gamma_at(const CurriculumConfig& config, int epoch) {
  check_epoch(config, epoch);
  return linear_ramp(config.gamma_start, config.gamma_end, config.gamma_ramp_epochs, epoch);
}

double rho_at(const CurriculumConfig& config, int epoch) {
  check_epoch(config, epoch);
  return linear_ramp(config.rho_start, config.rho_end, config.rho_ramp_epochs, epoch);
}

double lr_at(const CurriculumConfig& config, int epoch, ParamGroup group) {
  check_epoch(config, epoch);
  const double alpha0 = group == ParamGroup::encoder ? config.alpha0_encoder : config.alpha0_decoder;
  if (epoch == 0) return alpha0;
  return alpha0 * std::pow(1.0 - static_cast<double>(epoch) / static_cast<double>(config.e_max), config.delta);
}

Tensor class_weight_vector(const CurriculumConfig& config, std::size_t num_classes) {
  std::vector<float> w(num_classes, 1.0f);
  for (std::size_t k : config.doubled_classes) {
    if (k >= num_classes) {
      throw ConfigError("doubled class " + std::to_string(k) + " out of range for " + std::to_string(num_classes) +
                        " classes");
    }
    w[k] = 2.0f;
  }
  return Tensor::from_data({num_classes}, std::move(w));
}

}  // namespace proxyseg
