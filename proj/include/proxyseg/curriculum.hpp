#pragma once

#include <cstddef>
#include <set>

#include "proxyseg/model.hpp"
#include "proxyseg/tensor.hpp"

namespace proxyseg {

enum class ParamGroup { encoder, decoder };

/// Every per-epoch schedule of a training run.
struct CurriculumConfig {
  // Probability that a batch is drawn from the source domain.
  double gamma_start = 0.9;
  double gamma_end = 0.1;
  int gamma_ramp_epochs = 10;
  // Probability of dropping an agreed (easy) source pixel.
  double rho_start = 0.0;
  double rho_end = 1.0;
  int rho_ramp_epochs = 10;
  // Polynomial decay: lr = alpha0 * (1 - e / e_max)^delta.
  double alpha0_encoder = 0.001;
  double alpha0_decoder = 0.01;
  double delta = 0.9;
  int e_max = 20;
  double beta = 0.01;
  SimilarityMode similarity_mode = SimilarityMode::dot;
  bool similarity_include_biases = false;
  // Classes whose loss weight is doubled.
  std::set<std::size_t> doubled_classes{3, 5};
  double momentum = 0.9;
  double weight_decay = 1e-4;

  void validate() const;
  PenaltyOptions penalty() const { return {beta, similarity_mode, similarity_include_biases}; }
  bool operator==(const CurriculumConfig&) const = default;
};

// Linear ramp from start to end over [0, ramp], constant afterwards.
double gamma_at(const CurriculumConfig& config, int epoch);
double rho_at(const CurriculumConfig& config, int epoch);
double lr_at(const CurriculumConfig& config, int epoch, ParamGroup group);

/// 2 for doubled classes, 1 elsewhere.
Tensor class_weight_vector(const CurriculumConfig& config, std::size_t num_classes);

}  // namespace proxyseg
