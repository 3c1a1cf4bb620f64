"""Denoiser architecture test cases"""
from unittest import TestCase

import numpy as np
import torch

from jrm_lab import (CapacityError,
                     ConfigurationError,
                     CoupledVariant,
                     DimensionError,
                     ModelConfig,
                     NonFiniteError,
                     TokenBlock,
                     coupled_fusion_block,
                     init_params,
                     joint_loss)
from jrm_lab.jrm_denoiser import modulate, normalize_tokens, single_stream_block, timestep_embedding
from jrm_lab.model_config import COUPLED, SINGLE

TINY = ModelConfig(depth_single=2, width=32, heads=2, token_count=8, cond_tokens=5, time_embed_dim=16)


def _random_head(model, seed=0):
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        model.head.weight.copy_(0.1 * torch.randn(model.head.weight.shape, generator=generator,
                                                  dtype=model.head.weight.dtype))
        model.head.bias.copy_(0.1 * torch.randn(model.head.bias.shape, generator=generator,
                                                dtype=model.head.bias.dtype))
    return model


def _inputs(batch, count, config=TINY, seed=1):
    generator = torch.Generator().manual_seed(seed)
    z = torch.randn((batch, count, config.token_count, config.token_width), generator=generator,
                    dtype=torch.float64)
    cond = torch.randn((batch, count, config.cond_tokens, config.width), generator=generator,
                       dtype=torch.float64)
    t = torch.rand(batch, generator=generator, dtype=torch.float64)
    return z, t, cond


class TestModelConfig(TestCase):
    """Class for testing the block layout and parameter bookkeeping"""

    def test_block_layouts(self):
        """Replace swaps every other block, Insert adds one after each"""
        replace = ModelConfig(depth_single=6)
        insert = ModelConfig(depth_single=3, variant="Insert")
        self.assertEqual(replace.block_layout(), [SINGLE, COUPLED] * 3)
        self.assertEqual(insert.block_layout(), [SINGLE, COUPLED] * 3)
        self.assertIs(insert.variant, CoupledVariant.INSERT)
        self.assertEqual(len(ModelConfig(depth_single=4, variant="Insert").block_layout()), 8)
        self.assertEqual(ModelConfig(depth_single=4).block_layout().count(COUPLED), 2)

    def test_parameter_count_matches_module(self):
        """closed form equals the module's scalar count"""
        for config in (TINY, ModelConfig(), ModelConfig(depth_single=3, variant=CoupledVariant.INSERT)):
            with self.subTest(config.variant.value + str(config.depth_single)):
                model = init_params(config, 0)
                self.assertEqual(config.parameter_count(), sum(p.numel() for p in model.parameters()))

    def test_invalid_configs(self):
        """validation messages"""
        cases = [({"width": 30, "heads": 4}, "Model width must be divisible by heads"),
                 ({"variant": "Sideways"}, "Unknown coupled block variant"),
                 ({"depth_single": 0}, "Model setting depth_single must be a positive integer"),
                 ({"time_embed_dim": 15}, "Time embedding dimension must be even")]
        for settings, message in cases:
            with self.subTest(message):
                with self.assertRaises(ConfigurationError) as cm:
                    ModelConfig(**settings)
                self.assertEqual(cm.exception.message, message)

    def test_json_round_trip(self):
        """from_json inverts to_json and rejects unknown keys"""
        config = ModelConfig(depth_single=3, variant=CoupledVariant.INSERT, width=64)
        self.assertEqual(ModelConfig.from_json(config.to_json()), config)
        with self.assertRaises(ConfigurationError):
            ModelConfig.from_json({"depth": 3})


class TestJrmDenoiser(TestCase):
    """Class for testing the velocity network"""

    def setUp(self):
        torch.set_num_threads(1)
        self.model = _random_head(init_params(TINY, 3, torch.float64))

    def test_zero_head_outputs_zero(self):
        """freshly initialised networks predict zero velocity"""
        model = init_params(TINY, 3, torch.float64)
        z, t, cond = _inputs(2, 3)
        self.assertTrue(torch.equal(model(z, t, cond), torch.zeros_like(z)))

    def test_init_is_seeded(self):
        """same seed, same weights; the global RNG is untouched"""
        state = torch.random.get_rng_state()
        first, second = init_params(TINY, 7), init_params(TINY, 7)
        self.assertTrue(torch.equal(torch.random.get_rng_state(), state))
        for a, b in zip(first.parameters(), second.parameters()):
            self.assertTrue(torch.equal(a, b))

    def test_objects_are_permutation_equivariant(self):
        """reordering the objects reorders the velocities"""
        z, t, cond = _inputs(2, 4)
        order = torch.tensor([2, 0, 3, 1])
        out = self.model(z, t, cond)
        permuted = self.model(z[:, order], t, cond[:, order])
        self.assertTrue(torch.allclose(permuted, out[:, order], atol=1e-10))

    def test_uncoupled_objects_are_independent(self):
        """without fusion, changing one object's condition leaves the others alone"""
        z, t, cond = _inputs(1, 3)
        changed = cond.clone()
        changed[0, 1] += 1.0
        first = self.model(z, t, cond, coupled=False)
        second = self.model(z, t, changed, coupled=False)
        self.assertTrue(torch.allclose(first[0, 0], second[0, 0], atol=1e-12, rtol=0.0))
        self.assertTrue(torch.allclose(first[0, 2], second[0, 2], atol=1e-12, rtol=0.0))
        self.assertFalse(torch.allclose(first[0, 1], second[0, 1]))

    def test_coupled_objects_exchange_information(self):
        """with fusion, one object's condition reaches the others"""
        z, t, cond = _inputs(1, 2)
        changed = cond.clone()
        changed[0, 1] += 1.0
        self.assertFalse(torch.allclose(self.model(z, t, cond)[0, 0], self.model(z, t, changed)[0, 0]))

    def test_groups_in_a_batch_are_independent(self):
        """batched groups match groups run one at a time"""
        z, t, cond = _inputs(3, 2)
        batched = self.model(z, t, cond)
        for index in range(3):
            alone = self.model(z[index:index + 1], t[index:index + 1], cond[index:index + 1])
            self.assertTrue(torch.allclose(batched[index], alone[0], atol=1e-10))

    def test_forward_list_matches_tensor_form(self):
        """list form of one group"""
        z, t, cond = _inputs(1, 3)
        listed = self.model.forward_list(list(z[0]), t[0], list(cond[0]))
        self.assertTrue(torch.allclose(torch.stack(listed), self.model(z, t, cond)[0], atol=1e-12))

    def test_condition_encoder_ignores_point_order(self):
        """same tokens for a permuted cloud; empty maps to the null tokens"""
        rows = np.random.default_rng(0).normal(size=(50, 6))
        order = np.random.default_rng(1).permutation(50)
        first = self.model.encode_condition(rows)
        self.assertEqual(tuple(first.shape), (TINY.cond_tokens, TINY.width))
        self.assertTrue(torch.allclose(first, self.model.encode_condition(rows[order]), atol=1e-10))
        self.assertTrue(torch.equal(self.model.encode_condition(np.zeros((0, 6))), self.model.encoder.null_tokens))

    def test_shape_and_capacity_errors(self):
        """malformed inputs"""
        z, t, cond = _inputs(1, 2)
        with self.assertRaises(DimensionError):
            self.model(z[..., :5], t, cond)
        with self.assertRaises(DimensionError):
            self.model(z, t, cond[:, :1])
        with self.assertRaises(DimensionError):
            self.model(z, torch.zeros(2, dtype=torch.float64), cond)
        big_z, big_t, big_cond = _inputs(1, 10)
        with self.assertRaises(CapacityError):
            self.model(big_z, big_t, big_cond)
        nan_z = z.clone()
        nan_z[0, 0, 0, 0] = float("nan")
        with self.assertRaises(NonFiniteError):
            self.model(nan_z, t, cond)

    def test_fusion_block_needs_matching_shapes(self):
        """objects with different token counts cannot be fused"""
        block = TokenBlock(32, 2, 4).double()
        t_embed = torch.zeros(1, 32, dtype=torch.float64)
        with self.assertRaises(DimensionError):
            coupled_fusion_block(block, [torch.zeros(1, 8, 32, dtype=torch.float64),
                                         torch.zeros(1, 6, 32, dtype=torch.float64)], t_embed)
        out = coupled_fusion_block(block, [torch.zeros(1, 8, 32, dtype=torch.float64)] * 3, t_embed)
        self.assertEqual([tuple(o.shape) for o in out], [(1, 8, 32)] * 3)

    def test_objects_are_equivariant_for_any_group_size(self):
        """random reorderings for several group sizes, both variants"""
        insert = _random_head(init_params(ModelConfig(depth_single=2, width=32, heads=2, token_count=8, cond_tokens=5,
                                                      time_embed_dim=16, variant="Insert"), 3, torch.float64))
        rng = np.random.default_rng(12)
        for name, model in (("Replace", self.model), ("Insert", insert)):
            for count in (2, 3, 5, 9):
                with self.subTest(name + str(count)):
                    z, t, cond = _inputs(2, count, seed=count)
                    order = torch.as_tensor(rng.permutation(count))
                    out = model(z, t, cond)
                    self.assertTrue(torch.allclose(model(z[:, order], t, cond[:, order]), out[:, order],
                                                   atol=1e-10, rtol=0.0))

    def test_identical_objects_get_identical_velocities(self):
        """two copies of one (z, C) are denoised the same way"""
        z, t, cond = _inputs(1, 1)
        out = self.model(z.repeat(1, 2, 1, 1), t, cond.repeat(1, 2, 1, 1))
        self.assertTrue(torch.allclose(out[0, 0], out[0, 1], atol=1e-12, rtol=0.0))

    def test_coupling_one_object_is_the_plain_block(self):
        """fusing a single object runs the underlying block on it alone"""
        block = self.model.blocks[1]
        generator = torch.Generator().manual_seed(6)
        x = torch.randn((2, 8, 32), generator=generator, dtype=torch.float64)
        t_embed = torch.randn((2, 32), generator=generator, dtype=torch.float64)
        fused = coupled_fusion_block(block, [x], t_embed)
        self.assertEqual(len(fused), 1)
        self.assertTrue(torch.equal(fused[0], block(x, t_embed)))

    def test_single_object_forward_uses_plain_blocks(self):
        """with K=1 the coupled slots act as ordinary per-object blocks"""
        z, t, cond = _inputs(2, 1)
        model = self.model
        t_embed = model.time_embed(timestep_embedding(t, TINY.time_embed_dim))
        x = model.token_embed(z[:, 0])
        for kind, block in zip(model.layout, model.blocks):
            x = block(x, t_embed) if kind == COUPLED else single_stream_block(block, x, cond[:, 0], t_embed)
        shift, scale = model.final_modulation(t_embed).chunk(2, dim=-1)
        expected = model.head(modulate(model.final_norm(x), shift, scale))
        self.assertTrue(torch.allclose(model(z, t, cond)[:, 0], expected, atol=1e-12, rtol=0.0))

    def test_joint_loss_gradients_match_finite_differences(self):
        """autograd of the joint loss against central differences, encoder included"""
        config = ModelConfig(depth_single=2, width=32, heads=2, token_count=4, cond_tokens=3, time_embed_dim=8)
        for sizes in ((12,), (12, 9), (12, 0)):
            with self.subTest(str(sizes)):
                self.__check_gradients(_random_head(init_params(config, 5, torch.float64), 2), sizes)

    def __check_gradients(self, model, sizes):
        rng = np.random.default_rng(len(sizes) * 10 + sizes[-1])
        observations = [rng.normal(size=(size, 6)) for size in sizes]
        z = torch.as_tensor(rng.normal(size=(1, len(sizes), 4, 6)))
        target = torch.as_tensor(rng.normal(size=(1, len(sizes), 4, 6)))
        t = torch.tensor([0.3], dtype=torch.float64)

        def loss():
            cond = model.encode_groups([observations])
            return joint_loss(list(model(z, t, cond).unbind(1)), list(target.unbind(1)))

        model.zero_grad()
        loss().backward()
        step = 1e-6
        for name, param in model.named_parameters():
            grad = param.grad if param.grad is not None else torch.zeros_like(param)
            direction = torch.as_tensor(rng.normal(size=tuple(param.shape)))
            perturbations = [("direction", direction)]
            for flat in sorted({0, param.numel() // 3, param.numel() - 1}):
                single = torch.zeros_like(param)
                single.view(-1)[flat] = 1.0
                perturbations.append((str(flat), single))
            for label, delta in perturbations:
                with torch.no_grad():
                    original = param.detach().clone()
                    param.add_(step * delta)
                    upper = float(loss())
                    param.copy_(original - step * delta)
                    lower = float(loss())
                    param.copy_(original)
                numeric = (upper - lower) / (2 * step)
                analytic = float((grad * delta).sum())
                self.assertLessEqual(abs(analytic - numeric), 1e-4 * max(abs(analytic), abs(numeric)) + 1e-8,
                                     name + " " + label)

    def test_normalize_tokens(self):
        """normals become unit, zero normals point up"""
        tokens = torch.tensor([[1.0, 2.0, 3.0, 0.0, 0.0, 2.0], [0.0, 0.0, 0.0, 0.0, 0.0, 0.0]],
                              dtype=torch.float64)
        out = normalize_tokens(tokens)
        self.assertTrue(torch.equal(out[:, :3], tokens[:, :3]))
        self.assertTrue(torch.allclose(out[:, 3:], torch.tensor([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0]],
                                                                dtype=torch.float64)))
