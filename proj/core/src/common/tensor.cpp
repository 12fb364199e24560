#include "shapedis/common/tensor.hpp"

#include "shapedis/common/hash.hpp"

#include <sstream>

namespace shapedis {

torch::Tensor to_tensor(const RowMatrix& m, torch::Dtype dtype) {
    auto t = torch::from_blob(const_cast<double*>(m.data()), {m.rows(), m.cols()}, torch::kFloat64);
    return t.to(dtype).clone();
}

RowMatrix to_matrix(const torch::Tensor& t) {
    auto c = t.detach().to(torch::kFloat64).contiguous();
    if (c.dim() == 1) c = c.unsqueeze(1);
    RowMatrix m(c.size(0), c.size(1));
    std::memcpy(m.data(), c.data_ptr<double>(), sizeof(double) * static_cast<std::size_t>(c.numel()));
    return m;
}

std::string parameter_hash(const torch::nn::Module& module) {
    std::string bytes;
    const auto append = [&bytes](const torch::Tensor& t) {
        const auto c = t.detach().contiguous();
        bytes.append(static_cast<const char*>(c.data_ptr()), c.numel() * c.element_size());
    };
    for (const auto& p : module.parameters()) append(p);
    for (const auto& b : module.buffers()) append(b);
    return sha256_hex(bytes);
}

std::string module_to_bytes(const torch::nn::Module& module) {
    torch::serialize::OutputArchive ar;
    module.save(ar);
    std::ostringstream os;
    ar.save_to(os);
    return os.str();
}

void module_from_bytes(torch::nn::Module& module, const std::string& bytes) {
    torch::serialize::InputArchive ar;
    std::istringstream is(bytes);
    ar.load_from(is);
    module.load(ar);
}

std::string tensor_to_bytes(const torch::Tensor& t) {
    torch::serialize::OutputArchive ar;
    ar.write("t", t.detach());
    std::ostringstream os;
    ar.save_to(os);
    return os.str();
}

torch::Tensor tensor_from_bytes(const std::string& bytes) {
    torch::serialize::InputArchive ar;
    std::istringstream is(bytes);
    ar.load_from(is);
    torch::Tensor t;
    ar.read("t", t);
    return t;
}

void set_deterministic(std::uint64_t seed) {
    torch::set_num_threads(1);
    at::globalContext().setDeterministicAlgorithms(true, false);
    torch::manual_seed(seed);
}

}  // namespace shapedis
