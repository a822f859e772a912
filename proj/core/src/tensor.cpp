#include "spectra/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "spectra/error.hpp"
#include "spectra/rng.hpp"

namespace spectra {

namespace {

std::size_t checked_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) fail_config("tensor dim < 0 in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(checked_numel(shape_), 0.0);
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
    if (checked_numel(shape) != values.size()) {
        fail_config("tensor data length " + std::to_string(values.size()) +
                    " does not match shape " + shape_str(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(values);
    return t;
}

void Tensor::fill(double value) {
    for (double& x : data_) x = value;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

void ensure_finite(const Tensor& t, const std::string& what) {
    for (std::size_t i = 0; i < t.numel(); ++i) {
        if (!std::isfinite(t[i])) {
            fail_numeric(what + ": non-finite value " + std::to_string(t[i]) + " at flat index " +
                         std::to_string(i));
        }
    }
}

double max_abs(const Tensor& t) {
    double m = 0.0;
    for (std::size_t i = 0; i < t.numel(); ++i) m = std::max(m, std::fabs(t[i]));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        fail_config("max_abs_diff shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

double l2_norm(const Tensor& t) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.numel(); ++i) s += t[i] * t[i];
    return std::sqrt(s);
}

void axpy(Tensor& a, double s, const Tensor& b) {
    if (!a.same_shape(b)) {
        fail_config("axpy shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < a.numel(); ++i) pa[i] += s * pb[i];
}

Tensor& ParameterStore::add(const std::string& name, Tensor init, bool trainable) {
    if (index_.count(name)) fail_config("duplicate parameter name: " + name);
    ParamEntry e;
    e.name = name;
    e.grad = Tensor(init.shape());
    e.value = std::move(init);
    e.trainable = trainable;
    index_[name] = entries_.size();
    entries_.push_back(std::move(e));
    return entries_.back().value;
}

Tensor& ParameterStore::value(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) fail_config("unknown parameter: " + name);
    return entries_[it->second].value;
}

const Tensor& ParameterStore::value(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) fail_config("unknown parameter: " + name);
    return entries_[it->second].value;
}

Tensor& ParameterStore::grad(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) fail_config("unknown parameter: " + name);
    return entries_[it->second].grad;
}

const Tensor& ParameterStore::grad(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) fail_config("unknown parameter: " + name);
    return entries_[it->second].grad;
}

bool ParameterStore::trainable(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) fail_config("unknown parameter: " + name);
    return entries_[it->second].trainable;
}

void ParameterStore::zero_grads() {
    for (auto& e : entries_) e.grad.fill(0.0);
}

std::size_t ParameterStore::scalar_count(bool trainable_only) const {
    std::size_t n = 0;
    for (const auto& e : entries_) {
        if (trainable_only && !e.trainable) continue;
        n += e.value.numel();
    }
    return n;
}

std::uint64_t ParameterStore::checksum(int trainable_filter) const {
    std::uint64_t h = 0xCBF29CE484222325ull;
    auto mix = [&h](const void* p, std::size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001B3ull;
        }
    };
    for (const auto& e : entries_) {
        if (trainable_filter == 1 && !e.trainable) continue;
        if (trainable_filter == 2 && e.trainable) continue;
        mix(e.name.data(), e.name.size());
        mix(e.value.data(), e.value.numel() * sizeof(double));
    }
    return h;
}

}  // namespace spectra
