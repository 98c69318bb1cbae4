#include "sharpnorm/param_store.hpp"

#include "sharpnorm/error.hpp"

namespace sharpnorm {

namespace {

void enumerate_sequence(const std::vector<LayerSpec>& layers, const std::string& prefix,
                        std::vector<ParamArrayInfo>& out) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string path = prefix + std::to_string(i);
    const LayerSpec& layer = layers[i];
    if (const auto* d = std::get_if<DenseSpec>(&layer.kind)) {
      ParamArrayInfo w;
      w.kind = ParamKind::DenseWeight;
      w.path = path;
      w.rows = d->out;
      w.cols = d->in;
      w.size = static_cast<std::size_t>(d->out) * d->in;
      out.push_back(w);
      if (d->has_bias) {
        ParamArrayInfo b;
        b.kind = ParamKind::Bias;
        b.path = path;
        b.rows = d->out;
        b.cols = 1;
        b.size = static_cast<std::size_t>(d->out);
        b.partner = static_cast<int>(out.size()) - 1;
        out.push_back(b);
        out[out.size() - 2].partner = static_cast<int>(out.size()) - 1;
      }
    } else if (const auto* c = std::get_if<Conv2dSpec>(&layer.kind)) {
      ParamArrayInfo w;
      w.kind = ParamKind::ConvWeight;
      w.path = path;
      w.rows = c->out_ch;
      w.cols = c->in_ch * c->kernel * c->kernel;
      w.out_ch = c->out_ch;
      w.in_ch = c->in_ch;
      w.kernel = c->kernel;
      w.size = static_cast<std::size_t>(w.rows) * w.cols;
      out.push_back(w);
      if (c->has_bias) {
        ParamArrayInfo b;
        b.kind = ParamKind::Bias;
        b.path = path;
        b.rows = c->out_ch;
        b.cols = 1;
        b.size = static_cast<std::size_t>(c->out_ch);
        b.partner = static_cast<int>(out.size()) - 1;
        out.push_back(b);
        out[out.size() - 2].partner = static_cast<int>(out.size()) - 1;
      }
    } else if (const auto* p = std::get_if<ParallelSumSpec>(&layer.kind)) {
      enumerate_sequence(p->branch_a, path + ".a.", out);
      enumerate_sequence(p->branch_b, path + ".b.", out);
    }
  }
}

}  // namespace

std::vector<ParamArrayInfo> enumerate_param_arrays(const NetworkSpec& net) {
  std::vector<ParamArrayInfo> arrays;
  enumerate_sequence(net.layers, "", arrays);
  std::size_t offset = 0;
  for (auto& a : arrays) {
    a.offset = offset;
    offset += a.size;
  }
  return arrays;
}

ParamStore ParamStore::zeros(const NetworkSpec& net) {
  ParamStore ps;
  ps.arrays_ = enumerate_param_arrays(net);
  std::size_t total = 0;
  for (const auto& a : ps.arrays_) total += a.size;
  ps.flat_.assign(total, 0.0);
  return ps;
}

const ParamArrayInfo& ParamStore::array(int idx) const {
  require(idx >= 0 && idx < num_arrays(), ErrorCategory::Argument,
          "parameter array index out of range");
  return arrays_[static_cast<std::size_t>(idx)];
}

MatView ParamStore::matrix(int idx) {
  const ParamArrayInfo& a = array(idx);
  return MatView(flat_.data() + a.offset, a.rows, a.cols);
}

ConstMatView ParamStore::matrix(int idx) const {
  const ParamArrayInfo& a = array(idx);
  return ConstMatView(flat_.data() + a.offset, a.rows, a.cols);
}

VecView ParamStore::vector(int idx) {
  const ParamArrayInfo& a = array(idx);
  return VecView(flat_.data() + a.offset, static_cast<Eigen::Index>(a.size));
}

ConstVecView ParamStore::vector(int idx) const {
  const ParamArrayInfo& a = array(idx);
  return ConstVecView(flat_.data() + a.offset, static_cast<Eigen::Index>(a.size));
}

std::size_t ParamStore::flat_index(int idx, int row, int col) const {
  const ParamArrayInfo& a = array(idx);
  require(row >= 0 && row < a.rows && col >= 0 && col < a.cols, ErrorCategory::Argument,
          "parameter element (" + std::to_string(row) + "," + std::to_string(col) +
              ") out of range for array " + a.path);
  return a.offset + static_cast<std::size_t>(row) * a.cols + col;
}

std::size_t ParamStore::conv_flat_index(int idx, int oc, int ic, int kr, int kc) const {
  const ParamArrayInfo& a = array(idx);
  require(a.kind == ParamKind::ConvWeight, ErrorCategory::Argument,
          "conv_flat_index on non-conv array " + a.path);
  require(oc >= 0 && oc < a.out_ch && ic >= 0 && ic < a.in_ch && kr >= 0 && kr < a.kernel &&
              kc >= 0 && kc < a.kernel,
          ErrorCategory::Argument, "conv element out of range for array " + a.path);
  const int col = (ic * a.kernel + kr) * a.kernel + kc;
  return a.offset + static_cast<std::size_t>(oc) * a.cols + col;
}

ParamStore::Location ParamStore::locate(std::size_t flat_idx) const {
  require(flat_idx < flat_.size(), ErrorCategory::Argument, "flat parameter index out of range");
  for (int i = 0; i < num_arrays(); ++i) {
    const auto& a = arrays_[static_cast<std::size_t>(i)];
    if (flat_idx >= a.offset && flat_idx < a.offset + a.size) {
      const std::size_t rel = flat_idx - a.offset;
      return {i, static_cast<int>(rel / a.cols), static_cast<int>(rel % a.cols)};
    }
  }
  fail(ErrorCategory::Argument, "flat parameter index not covered by any array");
}

std::vector<int> ParamStore::weight_array_indices() const {
  std::vector<int> idx;
  for (int i = 0; i < num_arrays(); ++i)
    if (!arrays_[static_cast<std::size_t>(i)].is_bias()) idx.push_back(i);
  return idx;
}

ParamStore perturb(const ParamStore& params, std::span<const double> direction, double scale) {
  require(direction.size() == params.total_params(), ErrorCategory::Dimension,
          "perturbation direction length " + std::to_string(direction.size()) +
              " != parameter count " + std::to_string(params.total_params()));
  ParamStore out = params;
  auto flat = out.flat();
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] += scale * direction[i];
  return out;
}

int weight_array_at_layer(const ParamStore& params, int top_level_layer) {
  const std::string path = std::to_string(top_level_layer);
  for (int i = 0; i < params.num_arrays(); ++i) {
    const auto& a = params.array(i);
    if (!a.is_bias() && a.path == path) return i;
  }
  fail(ErrorCategory::Structure,
       "layer " + path + " has no weight array (not a top-level dense/conv layer)");
}

ParamGroups param_groups(const std::vector<ParamArrayInfo>& arrays) {
  ParamGroups g;
  g.per_array.reserve(arrays.size());
  for (const auto& a : arrays) {
    ArrayGroups ag;
    if (a.is_bias()) {
      ag.excluded = true;
    } else if (a.kind == ParamKind::ConvWeight) {
      ag.row_groups = a.out_ch;
      ag.col_groups = a.in_ch;
      ag.taps = a.kernel * a.kernel;
    } else {
      ag.row_groups = a.rows;
      ag.col_groups = a.cols;
      ag.taps = 1;
    }
    g.per_array.push_back(ag);
  }
  return g;
}

ParamGroups param_groups(const NetworkSpec& net) {
  return param_groups(enumerate_param_arrays(net));
}

}  // namespace sharpnorm
