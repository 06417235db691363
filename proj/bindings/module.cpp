// Python bindings for the core operations: tying maps, constrained
// convolution, the multiply-reduced forward path, and parameter accounting.
// Everything crosses the boundary in float64; the training stack stays C++.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "symconv/arch.hpp"
#include "symconv/conv.hpp"
#include "symconv/fastconv.hpp"
#include "symconv/nn.hpp"
#include "symconv/symmetry.hpp"

namespace py = pybind11;
using namespace symconv;

namespace {

Tensor64 tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    Shape shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i)
        shape[static_cast<std::size_t>(i)] = static_cast<std::size_t>(a.shape(i));
    Tensor64 t(shape);
    std::memcpy(t.data(), a.data(), sizeof(double) * t.size());
    return t;
}

py::array_t<double> array_from_tensor(const Tensor64& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> a(shape);
    std::memcpy(a.mutable_data(), t.data(), sizeof(double) * t.size());
    return a;
}

std::vector<SymmetryClass> classes_from_tokens(const std::vector<std::string>& tokens) {
    std::vector<SymmetryClass> out;
    out.reserve(tokens.size());
    for (const auto& tok : tokens) out.push_back(class_from_token(tok));
    return out;
}

Conv2dGeometry make_geometry(int in_channels, int out_channels, int kernel_size,
                             int stride, int padding, bool depthwise) {
    Conv2dGeometry g;
    g.in_channels = in_channels;
    g.out_channels = out_channels;
    g.kernel_size = kernel_size;
    g.stride = stride;
    g.padding = padding;
    g.depthwise = depthwise;
    g.validate();
    return g;
}

// project/fold_gradient want a k x k tensor; accept flat input of the right
// size too.
Tensor64 as_kernel(const TyingMap& t, Tensor64 a) {
    const auto k = static_cast<std::size_t>(t.kernel_size());
    if (a.rank() != 2 && a.size() == k * k)
        return Tensor64::from_values({k, k}, std::move(a.buffer()));
    return a;
}

py::dict dict_from_model_count(const ModelParamCount& c) {
    py::dict d;
    d["total_free"] = c.total_free;
    d["total_standard"] = c.total_standard;
    d["conv_free_weights"] = c.conv_free_weights;
    d["conv_standard_weights"] = c.conv_standard_weights;
    d["total_ratio"] = c.total_ratio();
    d["conv_weight_ratio"] = c.conv_weight_ratio();
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Symmetry-constrained convolution kernels: tying maps, constrained "
              "conv layers, multiply-reduced inference, parameter accounting.";

    m.def("symmetry_classes", [] {
        std::vector<std::string> tokens;
        for (auto c : kAllSymmetryClasses) tokens.emplace_back(to_token(c));
        return tokens;
    }, "All class tokens, in canonical order.");

    m.def("free_param_count", [](const std::string& token, int kernel_size) {
        return free_param_count(class_from_token(token), kernel_size);
    }, py::arg("symmetry"), py::arg("kernel_size"),
       "Free coefficients per k x k kernel slice for a symmetry class.");

    m.def("compression_ratio", [](const std::string& token, int kernel_size) {
        return compression_ratio(class_from_token(token), kernel_size);
    }, py::arg("symmetry"), py::arg("kernel_size"));

    py::class_<TyingMap>(m, "TyingMap",
        "Linear map between a symmetry class's free coefficients and the full "
        "k x k kernel. expand() places (sign-adjusted) copies, project() is the "
        "orthogonal projection onto the class subspace, fold_gradient() is the "
        "adjoint of expand.")
        .def(py::init([](const std::string& token, int kernel_size) {
            return TyingMap(class_from_token(token), kernel_size);
        }), py::arg("symmetry"), py::arg("kernel_size"))
        .def_property_readonly("symmetry",
            [](const TyingMap& t) { return std::string(to_token(t.symmetry_class())); })
        .def_property_readonly("kernel_size", &TyingMap::kernel_size)
        .def_property_readonly("free_count", &TyingMap::free_count)
        .def("orbits", [](const TyingMap& t) {
            py::list out;
            for (const auto& orbit : t.orbits()) {
                py::list members;
                for (auto [pos, sign] : orbit.members)
                    members.append(py::make_tuple(pos, sign));
                out.append(members);
            }
            return out;
        }, "Orbits as lists of (flat_position, sign), sorted by representative.")
        .def("expand", [](const TyingMap& t, py::array_t<double, py::array::c_style | py::array::forcecast> free) {
            return array_from_tensor(t.expand(tensor_from_array(free)));
        }, py::arg("free"))
        .def("project", [](const TyingMap& t, py::array_t<double, py::array::c_style | py::array::forcecast> full) {
            return array_from_tensor(t.project(as_kernel(t, tensor_from_array(full))));
        }, py::arg("kernel"))
        .def("fold_gradient", [](const TyingMap& t, py::array_t<double, py::array::c_style | py::array::forcecast> grad) {
            return array_from_tensor(t.fold_gradient(as_kernel(t, tensor_from_array(grad))));
        }, py::arg("grad_kernel"));

    m.def("conv2d_forward",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> x,
           py::array_t<double, py::array::c_style | py::array::forcecast> kernels,
           py::object bias, int stride, int padding, bool depthwise) {
            Tensor64 xt = tensor_from_array(x);
            Tensor64 kt = tensor_from_array(kernels);
            if (kt.rank() != 4) throw ShapeError("kernels must have shape (out, slices, k, k)");
            const int out_channels = static_cast<int>(kt.shape()[0]);
            const int k = static_cast<int>(kt.shape()[2]);
            const int in_channels = depthwise ? out_channels : static_cast<int>(kt.shape()[1]);
            auto geom = make_geometry(in_channels, out_channels, k, stride, padding, depthwise);
            std::vector<double> bias_vec;
            const std::vector<double>* bias_ptr = nullptr;
            if (!bias.is_none()) {
                bias_vec = bias.cast<std::vector<double>>();
                bias_ptr = &bias_vec;
            }
            return array_from_tensor(conv2d_forward(xt, kt, bias_ptr, geom));
        },
        py::arg("x"), py::arg("kernels"), py::arg("bias") = py::none(),
        py::arg("stride") = 1, py::arg("padding") = 0, py::arg("depthwise") = false,
        "Cross-correlation with zero padding on an (N, C, H, W) input.");

    py::class_<ConstrainedConv2dD>(m, "ConstrainedConv2d",
        "Convolution storing one free coefficient per orbit per kernel slice. "
        "Filters take their symmetry class from `assignments`; gradients fold "
        "back through the tying maps.")
        .def(py::init([](int in_channels, int out_channels, int kernel_size,
                         const std::vector<std::string>& assignments, int stride,
                         int padding, bool depthwise, bool bias) {
            auto geom = make_geometry(in_channels, out_channels, kernel_size,
                                      stride, padding, depthwise);
            return ConstrainedConv2dD(geom, classes_from_tokens(assignments), bias);
        }), py::arg("in_channels"), py::arg("out_channels"), py::arg("kernel_size"),
            py::arg("assignments"), py::arg("stride") = 1, py::arg("padding") = 0,
            py::arg("depthwise") = false, py::arg("bias") = false)
        .def_property_readonly("assignments", [](const ConstrainedConv2dD& l) {
            std::vector<std::string> tokens;
            for (auto c : l.assignments()) tokens.emplace_back(to_token(c));
            return tokens;
        })
        .def_property("free_weights",
            [](const ConstrainedConv2dD& l) {
                py::array_t<double> a(static_cast<py::ssize_t>(l.free_weights().size()));
                std::memcpy(a.mutable_data(), l.free_weights().data(),
                            sizeof(double) * l.free_weights().size());
                return a;
            },
            [](ConstrainedConv2dD& l, py::array_t<double, py::array::c_style | py::array::forcecast> v) {
                if (static_cast<std::size_t>(v.size()) != l.free_weights().size())
                    throw ShapeError("free weight count mismatch");
                std::memcpy(l.free_weights().data(), v.data(),
                            sizeof(double) * l.free_weights().size());
            })
        .def("expand_kernels", [](const ConstrainedConv2dD& l) {
            return array_from_tensor(l.expand_kernels());
        }, "Full (out, slices, k, k) kernel tensor implied by the free weights.")
        .def("forward", [](const ConstrainedConv2dD& l, py::array_t<double, py::array::c_style | py::array::forcecast> x) {
            return array_from_tensor(l.forward(tensor_from_array(x)));
        }, py::arg("x"))
        .def("backward", [](const ConstrainedConv2dD& l,
                            py::array_t<double, py::array::c_style | py::array::forcecast> x,
                            py::array_t<double, py::array::c_style | py::array::forcecast> grad_out) {
            auto grads = l.backward(tensor_from_array(x), tensor_from_array(grad_out));
            py::dict d;
            d["grad_x"] = array_from_tensor(grads.grad_x);
            py::array_t<double> gf(static_cast<py::ssize_t>(grads.grad_free.size()));
            std::memcpy(gf.mutable_data(), grads.grad_free.data(),
                        sizeof(double) * grads.grad_free.size());
            d["grad_free"] = gf;
            d["grad_bias"] = grads.grad_bias;
            return d;
        }, py::arg("x"), py::arg("grad_out"))
        .def("fast_forward", [](const ConstrainedConv2dD& l, py::array_t<double, py::array::c_style | py::array::forcecast> x) {
            OpCounter counter;
            Tensor64 y = fast_forward(l, tensor_from_array(x), counter);
            return py::make_tuple(array_from_tensor(y), counter.multiplies, counter.adds);
        }, py::arg("x"),
           "Multiply-reduced forward: returns (output, multiplies, adds).")
        .def("multiply_count", [](const ConstrainedConv2dD& l, int batch, int out_h, int out_w) {
            return multiply_count(l, batch, out_h, out_w);
        }, py::arg("batch"), py::arg("out_h"), py::arg("out_w"),
           "Closed-form multiply count of the fast path.")
        .def("naive_multiply_count", [](const ConstrainedConv2dD& l, int batch, int out_h, int out_w) {
            return naive_multiply_count(l.geometry(), batch, out_h, out_w);
        }, py::arg("batch"), py::arg("out_h"), py::arg("out_w"))
        .def("count_params", [](const ConstrainedConv2dD& l) {
            auto c = l.count_params();
            py::dict d;
            d["free_weights"] = c.free_weights;
            d["standard_weights"] = c.standard_weights;
            d["bias_params"] = c.bias_params;
            d["weight_ratio"] = c.weight_ratio();
            return d;
        });

    m.def("allocate_filters", [](const std::string& config, int out_channels) {
        auto classes = allocate_filters(FilterConfig::from_token(config), out_channels);
        std::vector<std::string> tokens;
        for (auto c : classes) tokens.emplace_back(to_token(c));
        return tokens;
    }, py::arg("filter_config"), py::arg("out_channels"),
       "Per-filter class assignment for a config token (contiguous blocks, "
       "largest-remainder rounding).");

    m.def("count_params", [](const std::string& arch, const std::string& filter_config,
                             const std::string& dataset, int classes, int replace_up_to) {
        ArchSpec spec = builtin_arch(arch, dataset, classes, replace_up_to);
        Model model = build_model(spec, FilterConfig::from_token(filter_config));
        return dict_from_model_count(model.count_params());
    }, py::arg("arch"), py::arg("filter_config") = "standard",
       py::arg("dataset") = "cifar10", py::arg("classes") = 10,
       py::arg("replace_up_to") = 4,
       "Exact parameter accounting for a built-in architecture "
       "(resnet20/32/44/56, small_cnn, dwnet).");

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
}
