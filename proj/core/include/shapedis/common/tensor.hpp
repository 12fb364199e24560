#pragma once

#include <torch/torch.h>

#include <Eigen/Core>

#include <string>

namespace shapedis {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Copies a row-major Eigen matrix into a new tensor of the given dtype.
torch::Tensor to_tensor(const RowMatrix& m, torch::Dtype dtype = torch::kFloat32);

/// Copies a 1-D or 2-D tensor (any floating dtype) into a double matrix.
RowMatrix to_matrix(const torch::Tensor& t);

/// SHA-256 over the raw bytes of all parameters and buffers, in registration order.
std::string parameter_hash(const torch::nn::Module& module);

std::string module_to_bytes(const torch::nn::Module& module);
void module_from_bytes(torch::nn::Module& module, const std::string& bytes);
std::string tensor_to_bytes(const torch::Tensor& t);
torch::Tensor tensor_from_bytes(const std::string& bytes);

/// Single-threaded math and fixed global seed ("deterministic mode").
void set_deterministic(std::uint64_t seed);

}  // namespace shapedis
