#include "sharpnorm/net_ops.hpp"

#include <cmath>
#include <memory>
#include <vector>

#include "sharpnorm/error.hpp"

namespace sharpnorm {

namespace {

struct BranchTraces;

struct LayerTrace {
  RowMat input;      // cached batch input (weight gradients, relu mask)
  Shape input_shape; // tensor shape of one row of `input`
  std::unique_ptr<BranchTraces> branches;
  int warray = -1;
  int barray = -1;
};

struct SeqTrace {
  std::vector<LayerTrace> layers;
};

struct BranchTraces {
  SeqTrace a, b;
};

class Engine {
 public:
  Engine(const NetworkSpec& net, const ParamStore& params) : net_(net), params_(params) {
    const auto arrays = enumerate_param_arrays(net);
    std::size_t total = 0;
    for (const auto& a : arrays) total += a.size;
    require(total == params.total_params(), ErrorCategory::Dimension,
            "parameter store has " + std::to_string(params.total_params()) +
                " values but the network needs " + std::to_string(total));
  }

  RowMat forward(const Eigen::Ref<const RowMat>& x, SeqTrace* tr) {
    require(x.rows() > 0, ErrorCategory::Argument, "empty batch");
    require(x.cols() == shape_numel(net_.input_shape), ErrorCategory::Dimension,
            "batch has " + std::to_string(x.cols()) + " features per row, network expects " +
                std::to_string(shape_numel(net_.input_shape)));
    int cursor = 0;
    Shape shape = net_.input_shape;
    return forward_seq(net_.layers, x, shape, cursor, tr);
  }

  // dy is dLoss/dlogits; accumulates parameter gradients into grad.
  void backward(const SeqTrace& tr, RowMat dy, Eigen::VectorXd& grad) const {
    backward_seq(net_.layers, tr, std::move(dy), grad);
  }

 private:
  const NetworkSpec& net_;
  const ParamStore& params_;

  RowMat forward_seq(const std::vector<LayerSpec>& layers, RowMat x, Shape& shape, int& cursor,
                     SeqTrace* tr) {
    for (const auto& layer : layers) {
      LayerTrace* lt = nullptr;
      if (tr) {
        tr->layers.emplace_back();
        lt = &tr->layers.back();
        lt->input_shape = shape;
      }

      if (const auto* d = std::get_if<DenseSpec>(&layer.kind)) {
        const int warray = cursor++;
        const int barray = d->has_bias ? cursor++ : -1;
        RowMat y = x * params_.matrix(warray).transpose();
        if (barray >= 0) y.rowwise() += params_.vector(barray).transpose();
        if (lt) {
          lt->input = std::move(x);
          lt->warray = warray;
          lt->barray = barray;
        }
        x = std::move(y);
      } else if (std::holds_alternative<ReluSpec>(layer.kind)) {
        if (lt) lt->input = x;
        x = x.cwiseMax(0.0);
      } else if (const auto* c = std::get_if<Conv2dSpec>(&layer.kind)) {
        const int warray = cursor++;
        const int barray = c->has_bias ? cursor++ : -1;
        RowMat y = conv_forward(*c, x, shape, warray, barray);
        if (lt) {
          lt->input = std::move(x);
          lt->warray = warray;
          lt->barray = barray;
        }
        x = std::move(y);
      } else if (std::holds_alternative<FlattenSpec>(layer.kind)) {
        // Rows are already flat; only the logical shape changes.
        if (lt) lt->input_shape = shape;
      } else {
        const auto& p = std::get<ParallelSumSpec>(layer.kind);
        if (lt) {
          lt->branches = std::make_unique<BranchTraces>();
          lt->input = x;
        }
        Shape shape_a = shape, shape_b = shape;
        RowMat ya = forward_seq(p.branch_a, x, shape_a, cursor, lt ? &lt->branches->a : nullptr);
        RowMat yb = forward_seq(p.branch_b, std::move(x), shape_b, cursor,
                                lt ? &lt->branches->b : nullptr);
        x = ya + yb;
      }
      shape = layer_output_shape(layer, shape);
    }
    return x;
  }

  RowMat backward_seq(const std::vector<LayerSpec>& layers, const SeqTrace& tr, RowMat dy,
                      Eigen::VectorXd& grad) const {
    for (std::size_t i = layers.size(); i-- > 0;) {
      const auto& layer = layers[i];
      const auto& lt = tr.layers[i];

      if (const auto* d = std::get_if<DenseSpec>(&layer.kind)) {
        (void)d;
        const auto& winfo = params_.array(lt.warray);
        Eigen::Map<RowMat> dw(grad.data() + winfo.offset, winfo.rows, winfo.cols);
        dw.noalias() += dy.transpose() * lt.input;
        if (lt.barray >= 0) {
          const auto& binfo = params_.array(lt.barray);
          Eigen::Map<Eigen::VectorXd> db(grad.data() + binfo.offset,
                                         static_cast<Eigen::Index>(binfo.size));
          db += dy.colwise().sum().transpose();
        }
        dy = dy * params_.matrix(lt.warray);
      } else if (std::holds_alternative<ReluSpec>(layer.kind)) {
        dy.array() *= (lt.input.array() > 0.0).cast<double>();
      } else if (const auto* c = std::get_if<Conv2dSpec>(&layer.kind)) {
        dy = conv_backward(*c, lt, dy, grad);
      } else if (std::holds_alternative<FlattenSpec>(layer.kind)) {
        // no-op
      } else {
        const auto& p = std::get<ParallelSumSpec>(layer.kind);
        RowMat dxa = backward_seq(p.branch_a, lt.branches->a, dy, grad);
        RowMat dxb = backward_seq(p.branch_b, lt.branches->b, std::move(dy), grad);
        dy = dxa + dxb;
      }
    }
    return dy;
  }

  RowMat conv_forward(const Conv2dSpec& c, const RowMat& x, const Shape& in_shape, int warray,
                      int barray) const {
    const int h = in_shape[1], w = in_shape[2];
    const int oh = (h + 2 * c.padding - c.kernel) / c.stride + 1;
    const int ow = (w + 2 * c.padding - c.kernel) / c.stride + 1;
    const Eigen::Index batch = x.rows();
    ConstMatView wm = params_.matrix(warray);

    RowMat y = RowMat::Zero(batch, static_cast<Eigen::Index>(c.out_ch) * oh * ow);
    if (barray >= 0) {
      ConstVecView bias = params_.vector(barray);
      for (int oc = 0; oc < c.out_ch; ++oc)
        y.middleCols(static_cast<Eigen::Index>(oc) * oh * ow, static_cast<Eigen::Index>(oh) * ow)
            .array() += bias[oc];
    }
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (int oc = 0; oc < c.out_ch; ++oc) {
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            double acc = 0.0;
            for (int ic = 0; ic < c.in_ch; ++ic) {
              for (int kr = 0; kr < c.kernel; ++kr) {
                const int iy = oy * c.stride + kr - c.padding;
                if (iy < 0 || iy >= h) continue;
                for (int kc = 0; kc < c.kernel; ++kc) {
                  const int ix = ox * c.stride + kc - c.padding;
                  if (ix < 0 || ix >= w) continue;
                  acc += wm(oc, (ic * c.kernel + kr) * c.kernel + kc) *
                         x(b, (static_cast<Eigen::Index>(ic) * h + iy) * w + ix);
                }
              }
            }
            y(b, (static_cast<Eigen::Index>(oc) * oh + oy) * ow + ox) += acc;
          }
        }
      }
    }
    return y;
  }

  RowMat conv_backward(const Conv2dSpec& c, const LayerTrace& lt, const RowMat& dy,
                       Eigen::VectorXd& grad) const {
    const int h = lt.input_shape[1], w = lt.input_shape[2];
    const int oh = (h + 2 * c.padding - c.kernel) / c.stride + 1;
    const int ow = (w + 2 * c.padding - c.kernel) / c.stride + 1;
    const Eigen::Index batch = dy.rows();
    ConstMatView wm = params_.matrix(lt.warray);
    const auto& winfo = params_.array(lt.warray);
    Eigen::Map<RowMat> dw(grad.data() + winfo.offset, winfo.rows, winfo.cols);

    if (lt.barray >= 0) {
      const auto& binfo = params_.array(lt.barray);
      Eigen::Map<Eigen::VectorXd> db(grad.data() + binfo.offset,
                                     static_cast<Eigen::Index>(binfo.size));
      for (int oc = 0; oc < c.out_ch; ++oc)
        db[oc] += dy.middleCols(static_cast<Eigen::Index>(oc) * oh * ow,
                                static_cast<Eigen::Index>(oh) * ow)
                      .sum();
    }

    RowMat dx = RowMat::Zero(batch, lt.input.cols());
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (int oc = 0; oc < c.out_ch; ++oc) {
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            const double g = dy(b, (static_cast<Eigen::Index>(oc) * oh + oy) * ow + ox);
            if (g == 0.0) continue;
            for (int ic = 0; ic < c.in_ch; ++ic) {
              for (int kr = 0; kr < c.kernel; ++kr) {
                const int iy = oy * c.stride + kr - c.padding;
                if (iy < 0 || iy >= h) continue;
                for (int kc = 0; kc < c.kernel; ++kc) {
                  const int ix = ox * c.stride + kc - c.padding;
                  if (ix < 0 || ix >= w) continue;
                  const Eigen::Index in_idx = (static_cast<Eigen::Index>(ic) * h + iy) * w + ix;
                  dw(oc, (ic * c.kernel + kr) * c.kernel + kc) += g * lt.input(b, in_idx);
                  dx(b, in_idx) += g * wm(oc, (ic * c.kernel + kr) * c.kernel + kc);
                }
              }
            }
          }
        }
      }
    }
    return dx;
  }
};

void check_labels(const Eigen::Ref<const RowMat>& X, std::span<const int> labels) {
  require(static_cast<std::size_t>(X.rows()) == labels.size(), ErrorCategory::Dimension,
          "batch has " + std::to_string(X.rows()) + " rows but " + std::to_string(labels.size()) +
              " labels");
}

}  // namespace

RowMat forward_batch(const NetworkSpec& net, const ParamStore& params,
                     const Eigen::Ref<const RowMat>& X) {
  Engine engine(net, params);
  return engine.forward(X, nullptr);
}

Eigen::VectorXd forward(const NetworkSpec& net, const ParamStore& params,
                        const Eigen::Ref<const Eigen::VectorXd>& x) {
  RowMat row = x.transpose();
  RowMat out = forward_batch(net, params, row);
  return out.row(0).transpose();
}

double batch_loss(const NetworkSpec& net, const ParamStore& params,
                  const Eigen::Ref<const RowMat>& X, std::span<const int> labels, LossId loss) {
  check_labels(X, labels);
  Engine engine(net, params);
  const RowMat logits = engine.forward(X, nullptr);
  double total = 0.0;
  for (Eigen::Index b = 0; b < logits.rows(); ++b)
    total += loss_value(loss, logits.row(b).transpose(), labels[static_cast<std::size_t>(b)]);
  return total / static_cast<double>(logits.rows());
}

std::pair<double, Eigen::VectorXd> loss_and_gradient(const NetworkSpec& net,
                                                     const ParamStore& params,
                                                     const Eigen::Ref<const RowMat>& X,
                                                     std::span<const int> labels, LossId loss) {
  check_labels(X, labels);
  require(loss_differentiable(loss), ErrorCategory::UnsupportedLoss,
          std::string("loss '") + to_string(loss) + "' has no gradient");

  Engine engine(net, params);
  SeqTrace trace;
  const RowMat logits = engine.forward(X, &trace);

  const Eigen::Index batch = logits.rows();
  RowMat dlogits(batch, logits.cols());
  double total = 0.0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int y = labels[static_cast<std::size_t>(b)];
    total += loss_value(loss, logits.row(b).transpose(), y);
    dlogits.row(b) = loss_gradient(loss, logits.row(b).transpose(), y).transpose();
  }
  dlogits /= static_cast<double>(batch);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.total_params()));
  engine.backward(trace, std::move(dlogits), grad);
  return {total / static_cast<double>(batch), std::move(grad)};
}

Eigen::VectorXd gradient(const NetworkSpec& net, const ParamStore& params,
                         const Eigen::Ref<const RowMat>& X, std::span<const int> labels,
                         LossId loss) {
  return loss_and_gradient(net, params, X, labels, loss).second;
}

RowMat per_sample_gradients(const NetworkSpec& net, const ParamStore& params,
                            const Eigen::Ref<const RowMat>& X, std::span<const int> labels,
                            LossId loss) {
  check_labels(X, labels);
  RowMat out(X.rows(), static_cast<Eigen::Index>(params.total_params()));
  for (Eigen::Index b = 0; b < X.rows(); ++b) {
    const RowMat row = X.row(b);
    const int y = labels[static_cast<std::size_t>(b)];
    out.row(b) = gradient(net, params, row, std::span<const int>(&y, 1), loss).transpose();
  }
  return out;
}

double dataset_loss(const NetworkSpec& net, const ParamStore& params, const LabeledDataset& ds,
                    LossId loss) {
  return batch_loss(net, params, ds.features, ds.labels, loss);
}

Eigen::VectorXd dataset_gradient(const NetworkSpec& net, const ParamStore& params,
                                 const LabeledDataset& ds, LossId loss) {
  return gradient(net, params, ds.features, ds.labels, loss);
}

}  // namespace sharpnorm
